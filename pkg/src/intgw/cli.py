"""Command-line interface.

Every subcommand reads its inputs from files and writes one output file.
Flags may also come from a YAML/JSON mapping given with ``--config``
(keys are flag names with underscores; a nested mapping under the
subcommand name is merged on top); flags on the command line win.  The
master seed resolves as ``--seed`` > ``$INTGW_SEED`` > config file > 0.

JSON outputs carry ``schema_version`` and the resolved configuration.
CSV outputs keep a single header row; their configuration is written to
``<out>.meta.json`` next to them.  Worker count, output paths and timings
are left out of the recorded configuration, so repeated runs with the same
seed produce byte-identical files for any ``--workers``.

Exit status: 0 on success, 1 on a domain error, 2 on a usage error or
malformed input (no output file is written in either failure case).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from .cir import LIMIT_LAWS, CirConfig, sample_limit_law, write_draws_csv
from .estimators import adaptive_fit, estimate_sigma2, fit, tau_from, RECIP_T
from .exceptions import ConfigurationError, IntGWError, MalformedInputError
from .model import load_spec, read_path_csv, simulate_path
from .montecarlo import SCHEMA_VERSION, ExperimentConfig, reproduce_table1, run_experiment, verify_clt
from .rng import SEED_ENV_VAR, check_seed, seed_from_env
from .testing import CALIBRATIONS, DEFAULT_GRID, DEFAULT_LIMIT_DRAWS, CriticalValueCache, decide_regime

# keys never recorded in output files
_UNRECORDED = {"command", "config", "workers", "out", "hist", "cache_dir", "func"}


class UsageError(Exception):
    pass


def _atomic_write(path: str | Path, writer) -> None:
    """Run ``writer(tmp_path)`` and move the result to ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".", prefix=f".{path.name}.")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump_json(record: dict) -> str:
    return json.dumps(record, indent=2, sort_keys=False) + "\n"


def _write_json(path, record: dict) -> None:
    if path is None:
        sys.stdout.write(_dump_json(record))
        return
    _atomic_write(path, lambda tmp: Path(tmp).write_text(_dump_json(record)))


def _envelope(command: str, config: dict, result: dict) -> dict:
    return {"schema_version": SCHEMA_VERSION, "command": command, "config": config, "result": result}


def _write_meta(out, command: str, config: dict) -> None:
    _write_json(f"{out}.meta.json", _envelope(command, config, {}))


def _recorded(args: argparse.Namespace) -> dict:
    cfg = {}
    for k, v in sorted(vars(args).items()):
        if k in _UNRECORDED:
            continue
        cfg[k] = v
    return cfg


def _require(args, *names) -> None:
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError(f"missing required option(s): {', '.join(missing)}")


def _check_out_dir(*paths) -> None:
    for p in paths:
        if p is None:
            continue
        parent = Path(p).parent
        if not parent.is_dir():
            raise UsageError(f"output directory {parent} does not exist")


# subcommands ---------------------------------------------------------------


def cmd_simulate(args) -> dict:
    _require(args, "spec", "n", "out")
    spec = load_spec(args.spec)
    path = simulate_path(spec, args.n, args.seed, args.replication, args.method)
    cfg = _recorded(args)
    cfg["model"] = spec.to_dict()
    _atomic_write(args.out, path.to_csv)
    _write_meta(args.out, "simulate", cfg)
    return {}


def cmd_estimate(args) -> dict:
    _require(args, "path")
    path = read_path_csv(args.path)
    result = {}
    if args.adaptive:
        a = adaptive_fit(path)
        result["estimate"] = a.estimate.to_dict()
        result["chosen_scheme"] = a.chosen
        result["preliminary"] = a.preliminary.to_dict()
        result["tau"] = a.tau.to_dict()
    else:
        est = fit(path, args.scheme)
        result["estimate"] = est.to_dict()
    if args.sigma2 or args.tau:
        mu_tilde = fit(path, RECIP_T).mu_hat
        s2 = estimate_sigma2(path, mu_tilde)
        result["sigma2_hat"] = s2
        result["mu_tilde"] = mu_tilde
        if args.tau:
            result["tau"] = tau_from(mu_tilde, s2).to_dict()
    _write_json(args.out, _envelope("estimate", _recorded(args), result))
    return result


def _parse_schemes(raw) -> tuple:
    if isinstance(raw, (list, tuple)):
        items = [str(s) for s in raw]
    else:
        items = str(raw).split(",")
    items = [s.strip() for s in items if s.strip()]
    if not items:
        raise UsageError("--schemes needs at least one of ols, wei, recip-t")
    return tuple(items)


def _parse_bins(raw):
    if raw in (None, "fd"):
        return "fd"
    try:
        return int(raw)
    except (TypeError, ValueError):
        raise UsageError(f"--bins must be 'fd' or an integer, got {raw!r}") from None


def cmd_mc(args) -> dict:
    _require(args, "spec", "n", "reps", "out")
    spec = load_spec(args.spec)
    schemes = _parse_schemes(args.schemes)
    cfg = ExperimentConfig(spec, args.n, args.reps, schemes, args.seed, _parse_bins(args.bins))
    summary = run_experiment(cfg, args.workers)
    record = summary.to_dict()
    _write_json(args.out, _envelope("mc", _recorded(args), record))
    if args.hist is not None:
        _atomic_write(args.hist, summary.histogram_csv)
        _write_meta(args.hist, "mc", _recorded(args))
    return record


def cmd_table1(args) -> dict:
    _require(args, "out")
    table = reproduce_table1(args.seed, args.reps, args.workers)
    _atomic_write(args.out, table.to_csv)
    _write_meta(args.out, "table1", _recorded(args))
    return {}


def cmd_limitdist(args) -> dict:
    _require(args, "which", "mu0", "sigma0", "out")
    cfg = CirConfig(args.mu0, args.sigma0, args.grid)
    sample = sample_limit_law(args.which, cfg, args.draws, args.seed, args.workers)
    _atomic_write(args.out, lambda tmp: write_draws_csv(tmp, sample))
    rec = _recorded(args)
    rec["rejected_draws"] = sample.rejected
    _write_meta(args.out, "limitdist", rec)
    return {}


def cmd_clt_check(args) -> dict:
    _require(args, "spec", "n", "reps")
    spec = load_spec(args.spec)
    check = verify_clt(spec, args.n, args.reps, args.seed, args.workers)
    cfg = _recorded(args)
    cfg["model"] = spec.to_dict()
    result = check.to_dict()
    result.pop("schema_version", None)
    _write_json(args.out, _envelope("clt-check", cfg, result))
    return result


def cmd_test_unit_root(args) -> dict:
    _require(args, "path")
    path = read_path_csv(args.path)
    cache = CriticalValueCache(args.cache_dir) if args.cache_dir else None
    decision = decide_regime(
        path,
        args.level,
        stationarity_pvalue=args.kpss_pvalue,
        estimator=args.estimator,
        limit_draws=args.draws,
        seed=args.seed,
        grid_size=args.grid,
        cache=cache,
        workers=args.workers,
        calibration=args.calibration,
    )
    ur = decision.unit_root.to_dict()
    ur.pop("schema_version", None)
    result = {
        "unit_root": ur,
        "regime": decision.regime,
        "unilateral": decision.unilateral,
        "stationarity_rejected": decision.stationarity_rejected,
    }
    _write_json(args.out, _envelope("test-unit-root", _recorded(args), result))
    return result


# parser --------------------------------------------------------------------


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _seed(text: str) -> int:
    try:
        return check_seed(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--config", help="YAML/JSON file of flag values (flags take precedence)")
    common.add_argument("--workers", type=int, help="worker threads (default: all cores; results do not depend on it)")
    common.add_argument("--seed", type=_seed, help=f"master seed (default: ${SEED_ENV_VAR} or 0)")

    p = argparse.ArgumentParser(prog="intgw", allow_abbrev=False, description="Integrated Galton-Watson processes with immigration.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    s = sub.add_parser(allow_abbrev=False, name="simulate", parents=[common], help="simulate one path to CSV")
    s.add_argument("--spec", help="model spec file (YAML or JSON)")
    s.add_argument("--n", type=_positive_int, help="number of transitions")
    s.add_argument("--replication", type=int, default=0, help="replication index within the seed")
    s.add_argument("--method", choices=("closure", "explicit"), default="closure")
    s.add_argument("--out", help="output CSV (t,X_t)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser(allow_abbrev=False, name="estimate", parents=[common], help="fit (m, mu) to a path")
    s.add_argument("--path", help="input CSV (t,X_t)")
    s.add_argument("--scheme", choices=("ols", "wei", "recip-t"), default="recip-t")
    s.add_argument("--sigma2", action="store_true", help="also report the offspring-variance estimate")
    s.add_argument("--tau", action="store_true", help="also report the transience index")
    s.add_argument("--adaptive", action="store_true", help="choose the weighting from the transience index")
    s.add_argument("--out", help="output JSON (default: stdout)")
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser(allow_abbrev=False, name="mc", parents=[common], help="Monte Carlo study of the intercept estimators")
    s.add_argument("--spec")
    s.add_argument("--n", type=_positive_int)
    s.add_argument("--reps", type=_positive_int)
    s.add_argument("--schemes", default="ols,recip-t", help="comma-separated list of ols, wei, recip-t")
    s.add_argument("--bins", default="fd", help="'fd' or a number of histogram bins")
    s.add_argument("--out", help="output JSON")
    s.add_argument("--hist", help="optional histogram CSV")
    s.set_defaults(func=cmd_mc)

    s = sub.add_parser(allow_abbrev=False, name="table1", parents=[common], help="1/t intercept means over the standard INARCH grid")
    s.add_argument("--reps", type=_positive_int, default=5000)
    s.add_argument("--out", help="output CSV")
    s.set_defaults(func=cmd_table1)

    s = sub.add_parser(allow_abbrev=False, name="limitdist", parents=[common], help="draws from a CIR limit law")
    s.add_argument("--which", choices=LIMIT_LAWS)
    s.add_argument("--mu0", type=float)
    s.add_argument("--sigma0", type=float)
    s.add_argument("--grid", type=_positive_int, default=1000)
    s.add_argument("--draws", type=_positive_int, default=10_000)
    s.add_argument("--out", help="output CSV")
    s.set_defaults(func=cmd_limitdist)

    s = sub.add_parser(allow_abbrev=False, name="clt-check", parents=[common], help="intercept CLT check under the unit root")
    s.add_argument("--spec")
    s.add_argument("--n", type=_positive_int)
    s.add_argument("--reps", type=_positive_int)
    s.add_argument("--out", help="output JSON (default: stdout)")
    s.set_defaults(func=cmd_clt_check)

    s = sub.add_parser(allow_abbrev=False, name="test-unit-root", parents=[common], help="test m = 1 on a path")
    s.add_argument("--path")
    s.add_argument("--level", type=float, default=0.05)
    s.add_argument("--estimator", choices=("wls", "ols"), default="wls")
    s.add_argument("--draws", type=_positive_int, default=DEFAULT_LIMIT_DRAWS, help="limit-law draws")
    s.add_argument("--grid", type=_positive_int, default=DEFAULT_GRID)
    s.add_argument("--calibration", choices=CALIBRATIONS, default="prelimit")
    s.add_argument("--kpss-pvalue", type=float, help="p-value of an external stationarity test")
    s.add_argument("--cache-dir", help="directory caching critical-value tables")
    s.add_argument("--out", help="output JSON (default: stdout)")
    s.set_defaults(func=cmd_test_unit_root)
    return p


def _load_config(path: str, command: str) -> dict:
    import yaml

    try:
        record = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise UsageError(f"config file {path} is not valid YAML/JSON: {exc}") from None
    if record is None:
        return {}
    if not isinstance(record, dict):
        raise UsageError(f"config file {path} must hold a mapping of flag names to values")
    flat = {k.replace("-", "_"): v for k, v in record.items() if not isinstance(v, dict)}
    nested = record.get(command)
    if isinstance(nested, dict):
        flat.update({k.replace("-", "_"): v for k, v in nested.items()})
    return flat


def _parse(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        sub = parser._subparsers._group_actions[0].choices[args.command]
        file_values = _load_config(args.config, args.command)
        unknown = sorted(set(file_values) - set(vars(args)) - {"seed"})
        if unknown:
            raise UsageError(f"config file {args.config}: unknown option(s) {', '.join(unknown)}")
        for k, v in file_values.items():
            if not _given_on_cli(argv, k):
                setattr(args, k, _coerce(sub, k, v))
    if not _given_on_cli(argv, "seed"):
        env_seed = seed_from_env(None)
        if env_seed is not None:
            args.seed = env_seed
    if args.seed is None:
        args.seed = 0
    return args


def _given_on_cli(argv, key: str) -> bool:
    flag = "--" + key.replace("_", "-")
    return any(a == flag or a.startswith(flag + "=") for a in (argv or []))


def _coerce(sub: argparse.ArgumentParser, key: str, value):
    """Apply the flag's own type conversion and choices to a config-file value."""
    for action in sub._actions:
        if action.dest != key:
            continue
        if isinstance(action, argparse._StoreTrueAction):
            if not isinstance(value, bool):
                raise UsageError(f"config option {key} must be true or false")
            return value
        if action.type is not None and value is not None and not (key == "schemes" and isinstance(value, list)):
            try:
                value = action.type(str(value))
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"config option {key}: {exc}") from None
        if action.choices is not None and value not in action.choices:
            raise UsageError(f"config option {key}: {value!r} not in {list(action.choices)}")
        return value
    return value


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _parse(argv)
        _check_out_dir(getattr(args, "out", None), getattr(args, "hist", None))
        for attr in ("spec", "path"):
            f = getattr(args, attr, None)
            if f is not None and not Path(f).is_file():
                raise UsageError(f"--{attr}: file {f} does not exist")
        args.func(args)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else 2
    except UsageError as exc:
        print(f"intgw: error: {exc}", file=sys.stderr)
        return 2
    except (MalformedInputError, ConfigurationError) as exc:
        print(f"intgw: error: {exc}", file=sys.stderr)
        return 2
    except IntGWError as exc:
        print(f"intgw: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        # invalid values reaching the library (e.g. a bad seed in a config file)
        print(f"intgw: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
