import json
import subprocess
import sys

import pytest

from intgw.cli import main
from intgw.estimators import fit
from intgw.model import ModelSpec, read_path_csv, simulate_path

INARCH = "offspring: {kind: poisson, mean: 1.0}\nimmigration: {kind: poisson, mean: 2.0}\n"


@pytest.fixture
def work(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("INTGW_SEED", raising=False)
    (tmp_path / "inarch.yaml").write_text(INARCH)
    (tmp_path / "exact.csv").write_text("t,X_t\n0,0\n1,2\n2,4\n3,6\n")
    return tmp_path


def _json(path):
    return json.loads(path.read_text())


class TestEstimate:
    def test_exact_fixture(self, work):
        assert main(["estimate", "--path", "exact.csv", "--scheme", "recip-t", "--out", "e.json"]) == 0
        d = _json(work / "e.json")
        assert d["schema_version"] == 1 and d["command"] == "estimate"
        assert d["result"]["estimate"]["m_hat"] == pytest.approx(1.0, abs=1e-12)
        assert d["result"]["estimate"]["mu_hat"] == pytest.approx(2.0, abs=1e-12)

    def test_stdout_when_no_out(self, work, capsys):
        assert main(["estimate", "--path", "exact.csv"]) == 0
        assert json.loads(capsys.readouterr().out)["result"]["estimate"]["scheme"] == "recip-t"

    @pytest.mark.parametrize("text", ["t,X_t\n0,0\n1,x\n", "x,y\n0,0\n", ""])
    def test_malformed_input(self, work, text, capsys):
        (work / "bad.csv").write_text(text)
        assert main(["estimate", "--path", "bad.csv", "--out", "e.json"]) == 2
        assert not (work / "e.json").exists()
        assert "error" in capsys.readouterr().err

    def test_missing_input(self, work):
        assert main(["estimate", "--path", "nope.csv", "--out", "e.json"]) == 2
        assert not (work / "e.json").exists()

    def test_degenerate_path_is_domain_error(self, work, capsys):
        (work / "zero.csv").write_text("t,X_t\n0,0\n1,0\n2,0\n3,0\n")
        assert main(["estimate", "--path", "zero.csv", "--out", "e.json"]) == 1
        assert "degenerate design" in capsys.readouterr().err
        assert not (work / "e.json").exists()

    def test_sigma2_tau_adaptive(self, work):
        assert main(["simulate", "--spec", "inarch.yaml", "--n", "400", "--seed", "3", "--out", "p.csv"]) == 0
        assert main(["estimate", "--path", "p.csv", "--sigma2", "--tau", "--adaptive", "--out", "e.json"]) == 0
        r = _json(work / "e.json")["result"]
        assert r["chosen_scheme"] == ("wei" if r["tau"]["tau_hat"] > 1 else "recip-t")
        assert r["sigma2_hat"] > 0


class TestSimulate:
    def test_round_trip(self, work):
        assert main(["simulate", "--spec", "inarch.yaml", "--n", "250", "--seed", "9", "--out", "p.csv"]) == 0
        direct = simulate_path(ModelSpec.inarch(2.0), 250, 9)
        assert read_path_csv(work / "p.csv") == direct
        assert main(["estimate", "--path", "p.csv", "--scheme", "ols", "--out", "e.json"]) == 0
        est = fit(direct, "ols")
        r = _json(work / "e.json")["result"]["estimate"]
        assert (r["m_hat"], r["mu_hat"]) == (est.m_hat, est.mu_hat)
        meta = _json(work / "p.csv.meta.json")
        assert meta["config"]["seed"] == 9 and meta["config"]["model"]["immigration"]["mean"] == 2.0

    def test_usage_errors(self, work):
        assert main(["simulate", "--spec", "inarch.yaml", "--out", "p.csv"]) == 2  # missing --n
        assert main(["simulate", "--spec", "inarch.yaml", "--n", "0", "--out", "p.csv"]) == 2
        assert main(["simulate", "--spec", "inarch.yaml", "--n", "5", "--out", "no/dir/p.csv"]) == 2
        assert main(["bogus"]) == 2
        assert not (work / "p.csv").exists()

    def test_bad_spec(self, work):
        (work / "bad.yaml").write_text("offspring: {kind: poisson, mean: 1}\nimmigration: {kind: poisson, mean: -2}\n")
        assert main(["simulate", "--spec", "bad.yaml", "--n", "5", "--out", "p.csv"]) == 2
        assert not (work / "p.csv").exists()


class TestSeedAndConfig:
    def test_env_seed(self, work, monkeypatch):
        monkeypatch.setenv("INTGW_SEED", "77")
        assert main(["simulate", "--spec", "inarch.yaml", "--n", "50", "--out", "a.csv"]) == 0
        assert read_path_csv(work / "a.csv") == simulate_path(ModelSpec.inarch(2.0), 50, 77)
        # an explicit flag wins over the environment
        assert main(["simulate", "--spec", "inarch.yaml", "--n", "50", "--seed", "1", "--out", "b.csv"]) == 0
        assert read_path_csv(work / "b.csv") == simulate_path(ModelSpec.inarch(2.0), 50, 1)

    def test_config_file_with_flag_precedence(self, work):
        (work / "c.yaml").write_text("n: 40\nseed: 5\nsimulate:\n  method: explicit\n")
        assert main(["simulate", "--config", "c.yaml", "--spec", "inarch.yaml", "--out", "a.csv"]) == 0
        meta = _json(work / "a.csv.meta.json")["config"]
        assert (meta["n"], meta["seed"], meta["method"]) == (40, 5, "explicit")
        assert main(["simulate", "--config", "c.yaml", "--spec", "inarch.yaml", "--n", "12", "--out", "b.csv"]) == 0
        assert read_path_csv(work / "b.csv").n == 12

    def test_config_errors(self, work):
        (work / "c.yaml").write_text("bogus_option: 3\n")
        assert main(["simulate", "--config", "c.yaml", "--spec", "inarch.yaml", "--n", "5", "--out", "a.csv"]) == 2
        (work / "d.yaml").write_text("n: -4\n")
        assert main(["simulate", "--config", "d.yaml", "--spec", "inarch.yaml", "--out", "a.csv"]) == 2
        assert main(["simulate", "--config", "missing.yaml", "--spec", "inarch.yaml", "--out", "a.csv"]) == 2


def _twice(work, cmd, outputs):
    """Run ``cmd`` with one and with three workers; return the output bytes of each run."""
    runs = []
    for workers, tag in ((1, "a"), (3, "b")):
        args = [a.replace("{tag}", tag) for a in cmd] + ["--workers", str(workers)]
        assert main(args) == 0
        runs.append([(work / o.replace("{tag}", tag)).read_bytes() for o in outputs])
    return runs


class TestDeterminism:
    @pytest.mark.parametrize(
        "cmd, outputs",
        [
            (
                ["mc", "--spec", "inarch.yaml", "--n", "100", "--reps", "300", "--seed", "4", "--out", "{tag}.json", "--hist", "{tag}.csv"],
                ["{tag}.json", "{tag}.csv", "{tag}.csv.meta.json"],
            ),
            (["table1", "--seed", "2", "--reps", "30", "--out", "{tag}.csv"], ["{tag}.csv", "{tag}.csv.meta.json"]),
            (
                ["limitdist", "--which", "ols-pair", "--mu0", "2", "--sigma0", "1", "--grid", "100", "--draws", "700", "--seed", "3", "--out", "{tag}.csv"],
                ["{tag}.csv", "{tag}.csv.meta.json"],
            ),
            (["clt-check", "--spec", "inarch.yaml", "--n", "500", "--reps", "200", "--seed", "6", "--out", "{tag}.json"], ["{tag}.json"]),
            (["simulate", "--spec", "inarch.yaml", "--n", "300", "--seed", "8", "--out", "{tag}.csv"], ["{tag}.csv", "{tag}.csv.meta.json"]),
        ],
    )
    def test_byte_identical_across_workers(self, work, cmd, outputs):
        a, b = _twice(work, cmd, outputs)
        assert a == b

    def test_unit_root_output(self, work):
        assert main(["simulate", "--spec", "inarch.yaml", "--n", "300", "--seed", "8", "--out", "p.csv"]) == 0
        cmd = ["test-unit-root", "--path", "p.csv", "--draws", "600", "--grid", "150", "--seed", "2", "--kpss-pvalue", "0.01", "--out", "{tag}.json"]
        a, b = _twice(work, cmd, ["{tag}.json"])
        assert a == b
        r = json.loads(a[0])["result"]
        assert r["regime"] in ("LikelyIntegrated", "Inconclusive") and r["unilateral"] is False

    def test_limitdist_laws(self, work):
        for which in ("wls-slope", "mu-gauss"):
            args = ["limitdist", "--which", which, "--mu0", "2", "--sigma0", "1", "--grid", "50", "--draws", "20", "--out", f"{which}.csv"]
            assert main(args) == 0
            assert len((work / f"{which}.csv").read_text().splitlines()) == 21


class TestDomainErrors:
    def test_clt_on_fixture(self, work, capsys):
        (work / "fix.yaml").write_text("offspring: {kind: dirac, value: 1}\nimmigration: {kind: dirac, value: 2}\n")
        with pytest.warns(UserWarning):
            assert main(["clt-check", "--spec", "fix.yaml", "--n", "50", "--reps", "5", "--out", "c.json"]) == 1
        assert "sigma2 = 0" in capsys.readouterr().err
        assert not (work / "c.json").exists()

    def test_unit_root_constant_path(self, work):
        (work / "zero.csv").write_text("t,X_t\n0,0\n1,0\n2,0\n")
        assert main(["test-unit-root", "--path", "zero.csv", "--out", "u.json"]) == 1
        assert not (work / "u.json").exists()


def test_console_entry_point(work):
    out = subprocess.run(
        [sys.executable, "-m", "intgw.cli", "estimate", "--path", "exact.csv"], capture_output=True, text=True, check=True
    )
    assert json.loads(out.stdout)["result"]["estimate"]["mu_hat"] == pytest.approx(2.0)
    bad = subprocess.run([sys.executable, "-m", "intgw.cli", "estimate"], capture_output=True, text=True)
    assert bad.returncode == 2
