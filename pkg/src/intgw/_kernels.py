"""Compiled inner loops.

All kernels take a :class:`numpy.random.Generator` and draw from it in a
fixed order, so a kernel call is a pure function of the generator state.
"""

import numba
import numpy as np

# offspring kinds
OFF_POISSON = 0
OFF_GEOMETRIC = 1
OFF_BERNOULLI = 2
OFF_DIRAC = 3

# immigration kinds
IMM_POISSON = 0
IMM_NEGBIN = 1
IMM_DIRAC = 2


@numba.njit(nogil=True, cache=True)
def offspring_sum(gen, kind, mean, value, x):
    """Total offspring of ``x`` individuals, one draw by additive closure."""
    if x == 0:
        return 0
    if kind == OFF_POISSON:
        return gen.poisson(mean * x)
    if kind == OFF_GEOMETRIC:
        return gen.negative_binomial(float(x), 1.0 / (1.0 + mean))
    if kind == OFF_BERNOULLI:
        return gen.binomial(x, mean)
    return value * x


@numba.njit(nogil=True, cache=True)
def offspring_sum_explicit(gen, kind, mean, value, x):
    """Same law as :func:`offspring_sum`, summing ``x`` single draws."""
    total = 0
    for _ in range(x):
        if kind == OFF_POISSON:
            total += gen.poisson(mean)
        elif kind == OFF_GEOMETRIC:
            total += gen.negative_binomial(1.0, 1.0 / (1.0 + mean))
        elif kind == OFF_BERNOULLI:
            total += gen.binomial(1, mean)
        else:
            total += value
    return total


@numba.njit(nogil=True, cache=True)
def immigration_draw(gen, kind, mean, dispersion, value):
    if kind == IMM_POISSON:
        return gen.poisson(mean)
    if kind == IMM_NEGBIN:
        return gen.negative_binomial(dispersion, dispersion / (dispersion + mean))
    return value


@numba.njit(nogil=True, cache=True)
def fill_path(gen, okind, omean, ovalue, ikind, imean, idisp, ivalue, out, explicit):
    """Write X_0..X_n into ``out`` (length n + 1), starting from X_0 = 0.

    Per step the offspring total is drawn before the immigration count.
    """
    out[0] = 0
    x = 0
    for t in range(1, out.shape[0]):
        if explicit:
            z = offspring_sum_explicit(gen, okind, omean, ovalue, x)
        else:
            z = offspring_sum(gen, okind, omean, ovalue, x)
        x = z + immigration_draw(gen, ikind, imean, idisp, ivalue)
        out[t] = x


@numba.njit(nogil=True, cache=True)
def fill_increments(gen, okind, omean, ovalue, ikind, imean, idisp, ivalue, x_prev, out):
    """``out[i]`` = one-step draw of X_t given X_{t-1} = ``x_prev``."""
    for i in range(out.shape[0]):
        z = offspring_sum(gen, okind, omean, ovalue, x_prev)
        out[i] = z + immigration_draw(gen, ikind, imean, idisp, ivalue)


@numba.njit(nogil=True, cache=True)
def nsum(a):
    """Neumaier-compensated sum of a float array."""
    s = 0.0
    c = 0.0
    for v in a:
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
    return s + c


@numba.njit(nogil=True, cache=True)
def wls_core(x, y, w):
    """Weighted least squares of y on (x, 1).

    Returns ``(m, mu, s_w, s_wx, s_wxx, s_wy, s_wxy, s_xx_centered)``.
    The slope is taken from centred sums (two passes), which avoids the
    cancellation of the raw normal-equation determinant.
    """
    n = x.shape[0]
    wx = np.empty(n)
    wy = np.empty(n)
    for i in range(n):
        wx[i] = w[i] * x[i]
        wy[i] = w[i] * y[i]
    s_w = nsum(w)
    s_wx = nsum(wx)
    s_wy = nsum(wy)
    xbar = s_wx / s_w
    ybar = s_wy / s_w
    cxx = np.empty(n)
    cxy = np.empty(n)
    rxx = np.empty(n)
    rxy = np.empty(n)
    for i in range(n):
        dx = x[i] - xbar
        cxx[i] = w[i] * dx * dx
        cxy[i] = w[i] * dx * (y[i] - ybar)
        rxx[i] = wx[i] * x[i]
        rxy[i] = wx[i] * y[i]
    sxx = nsum(cxx)
    sxy = nsum(cxy)
    s_wxx = nsum(rxx)
    s_wxy = nsum(rxy)
    if sxx > 0.0:
        m = sxy / sxx
    else:
        m = np.nan
    mu = ybar - m * xbar
    return m, mu, s_w, s_wx, s_wxx, s_wy, s_wxy, sxx


@numba.njit(nogil=True, cache=True)
def unit_root_sums(path, mu0):
    """Normalised 1/t-weighted sums of a path, using W_t = X_t - X_{t-1} - mu0.

    Returns, in order: sum X_{t-1}/t, sum X_{t-1}^2/t, sum W_t X_{t-1}/t,
    sum W_t/t, sum X_{t-1}, sum X_{t-1}^2, sum W_t X_{t-1}, sum W_t.
    """
    n = path.shape[0] - 1
    a = np.empty((8, n))
    for t in range(1, n + 1):
        xp = float(path[t - 1])
        wt = float(path[t]) - xp - mu0
        a[0, t - 1] = xp / t
        a[1, t - 1] = xp * xp / t
        a[2, t - 1] = wt * xp / t
        a[3, t - 1] = wt / t
        a[4, t - 1] = xp
        a[5, t - 1] = xp * xp
        a[6, t - 1] = wt * xp
        a[7, t - 1] = wt
    out = np.empty(8)
    for k in range(8):
        out[k] = nsum(a[k])
    return out


@numba.njit(nogil=True, cache=True)
def cir_fill(gen, mu0, sigma0, grid_size, values, increments):
    """Full-truncation Euler scheme for dY = mu0 ds + sigma0 sqrt(Y) dB, Y_0 = 0."""
    dt = 1.0 / grid_size
    sq = np.sqrt(dt)
    values[0] = 0.0
    y = 0.0
    for k in range(grid_size):
        db = sq * gen.standard_normal()
        increments[k] = db
        y = y + mu0 * dt + sigma0 * np.sqrt(max(y, 0.0)) * db
        if y < 0.0:
            y = 0.0
        values[k + 1] = y


@numba.njit(nogil=True, cache=True)
def cir_functionals(values, increments, mu0, sigma0):
    """Limit functionals of one CIR path on the uniform grid of [0, 1].

    Deterministic integrals use the trapezoid rule; at s = 0 the integrand
    Y_s/s is given its almost-sure limit mu0 and the others vanish.
    Stochastic integrals are left-point (Ito) sums; integrands carrying
    1/s start at s = dt.

    Returns ``(int Y/s, int Y^2/s, sigma0 int Y^{3/2}/s dB,
    sigma0 int sqrt(Y) dB, int Y, int Y^2, sigma0 int Y^{3/2} dB)``.
    """
    N = increments.shape[0]
    dt = 1.0 / N
    f1 = np.empty(N + 1)
    f2 = np.empty(N + 1)
    f3 = np.empty(N + 1)
    f4 = np.empty(N + 1)
    f1[0] = 0.5 * mu0
    f2[0] = 0.0
    f3[0] = 0.0
    f4[0] = 0.0
    for k in range(1, N + 1):
        y = values[k]
        s = k * dt
        wgt = 0.5 if k == N else 1.0
        f1[k] = wgt * y / s
        f2[k] = wgt * y * y / s
        f3[k] = wgt * y
        f4[k] = wgt * y * y
    g1 = np.empty(N)
    g2 = np.empty(N)
    g3 = np.empty(N)
    for k in range(N):
        y = max(values[k], 0.0)
        db = increments[k]
        r = np.sqrt(y)
        g2[k] = r * db
        g3[k] = y * r * db
        if k == 0:
            g1[k] = 0.0
        else:
            g1[k] = y * r / (k * dt) * db
    return (
        dt * nsum(f1),
        dt * nsum(f2),
        sigma0 * nsum(g1),
        sigma0 * nsum(g2),
        dt * nsum(f3),
        dt * nsum(f4),
        sigma0 * nsum(g3),
    )


@numba.njit(nogil=True, cache=True)
def cir_functionals_block(gen, mu0, sigma0, grid_size, count, out):
    """Simulate ``count`` CIR paths and store their functionals in ``out[:count]``."""
    values = np.empty(grid_size + 1)
    increments = np.empty(grid_size)
    for i in range(count):
        cir_fill(gen, mu0, sigma0, grid_size, values, increments)
        r = cir_functionals(values, increments, mu0, sigma0)
        for j in range(7):
            out[i, j] = r[j]


@numba.njit(nogil=True, cache=True)
def cir_wls_prelimit_block(gen, mu0, sigma0, grid_size, harmonic_n, extra_var, count, out):
    """Pre-limit law of n(m_tilde - 1) from CIR paths, ``count`` draws into ``out``.

    With A = dt sum Y_{k-1}/s_k, B = dt sum Y_{k-1}^2/s_k,
    C = sum Y_{k-1}/s_k dM_k and D = sum dM_k/s_k (dM the martingale
    increment of Y), the statistic is (H C - A D) / (H B - A^2) where H is
    the harmonic number of the sample size.  ``extra_var`` adds an
    independent Gaussian to D for the part of [1/n, dt) below the grid.
    """
    dt = 1.0 / grid_size
    values = np.empty(grid_size + 1)
    increments = np.empty(grid_size)
    ta = np.empty(grid_size)
    tb = np.empty(grid_size)
    tc = np.empty(grid_size)
    td = np.empty(grid_size)
    sd_extra = np.sqrt(extra_var)
    for i in range(count):
        cir_fill(gen, mu0, sigma0, grid_size, values, increments)
        for k in range(1, grid_size + 1):
            s = k * dt
            yp = values[k - 1]
            dm = values[k] - yp - mu0 * dt
            ta[k - 1] = yp / s
            tb[k - 1] = yp * yp / s
            tc[k - 1] = yp / s * dm
            td[k - 1] = dm / s
        A = dt * nsum(ta)
        B = dt * nsum(tb)
        C = nsum(tc)
        D = nsum(td) + sd_extra * gen.standard_normal()
        det = harmonic_n * B - A * A
        if det > 0.0:
            out[i] = (harmonic_n * C - A * D) / det
        else:
            out[i] = np.nan
