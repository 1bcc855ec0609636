import csv
import json

import numpy as np
import pytest

from irs_ofdma import cli
from irs_ofdma import experiment as ex
from irs_ofdma.alternating_optimizer import run_scheme
from irs_ofdma.resource_allocation import Allocation
from irs_ofdma.scenario import ScenarioConfig, generate_realization

TINY = ScenarioConfig(K=2, N=4, Q=2, M=3, I=1, L0=2, L1=2, L2=2,
                      num_realizations=2, seed=11)


@pytest.fixture(scope="module")
def summary():
    return ex.run_monte_carlo(TINY, ["no_irs", "dynamic", "fixed"], [2, 3])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_single_record():
    s = ex.run_monte_carlo(TINY.replace(num_realizations=1), ["random_phase_2"])
    assert len(s.records) == 1
    assert s.stat("random_phase_2", TINY.M).n == 1


def test_scheme_order_and_validation():
    assert ex.ordered_schemes(["no_irs", "dynamic", "fixed"]) == \
        ["fixed", "dynamic", "no_irs"]
    with pytest.raises(ValueError):
        ex.ordered_schemes(["fixed", "bogus"])
    with pytest.raises(ValueError):
        ex.run_monte_carlo(TINY, ["fixed"], [0])


def test_summary_contents(summary, tmp_path):
    paths = ex.emit_summary(summary, tmp_path)
    rows = read_csv(paths["summary.csv"])
    assert list(rows[0]) == list(ex.SUMMARY_COLUMNS)
    assert len(rows) == 3 * 2
    doc = json.loads(paths["records.json"].read_text())
    for row in rows:
        rates = [r["rate"] for r in doc["records"]
                 if r["scheme"] == row["scheme"] and r["M"] == int(row["M"])]
        assert int(row["n"]) == len(rates) == TINY.num_realizations
        assert float(row["mean_rate_bpshz"]) == pytest.approx(np.mean(rates), rel=1e-8)
    assert ScenarioConfig.from_dict(doc["config"]) == TINY
    assert json.dumps(doc["config"]) == json.dumps(TINY.to_dict())
    assert "wall_time" not in doc["records"][0]
    assert len(read_csv(paths["timings.csv"])) == len(summary.records)


def test_dynamic_not_below_fixed(summary):
    for M in summary.M_values:
        for d, f in zip(summary.select("dynamic", M), summary.select("fixed", M)):
            assert d.rate >= f.rate - 1e-3


def test_no_irs_constant_in_M(summary):
    assert np.array_equal(summary.rates("no_irs", 2), summary.rates("no_irs", 3))


def test_bitwise_reproducible_any_worker_count(summary, tmp_path):
    again = ex.run_monte_carlo(TINY, ["no_irs", "dynamic", "fixed"], [2, 3], workers=2)
    a = ex.emit_summary(summary, tmp_path / "a")
    b = ex.emit_summary(again, tmp_path / "b")
    for name in ("summary.csv", "records.json"):
        assert a[name].read_bytes() == b[name].read_bytes()


def test_dump_unassigned(tmp_path):
    path = ex.dump_allocation(Allocation.empty(2, 3, 4), tmp_path / "a.csv")
    alloc = ex.load_allocation(path, K=2)
    assert np.all(alloc.assignment() == -1)
    assert np.all(alloc.p == 0)


def test_dump_roundtrip(tmp_path):
    real = generate_realization(TINY, 0)
    res = run_scheme("dynamic", real, TINY)
    path = ex.dump_allocation(res, tmp_path / "alloc.csv")
    back = ex.load_allocation(path, K=TINY.K)
    assert np.array_equal(back.alpha, res.allocation.alpha)
    assert np.array_equal(back.p, res.allocation.p)
    assert ex.distinct_users_from_dump(path) == res.distinct_users_per_slot


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        ex.load_allocation(path)


def test_emit_error_has_path(tmp_path, summary):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="file"):
        ex.emit_summary(summary, blocker / "sub")


# ---------------------------------------------------------------------------
# command line


@pytest.fixture()
def tiny_config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(TINY.replace(num_realizations=1).to_dict()))
    return path


def test_cli_run(tiny_config, tmp_path, capsys):
    out = tmp_path / "out"
    code = cli.main(["run", "--config", str(tiny_config), "--out", str(out),
                     "--schemes", "fixed,no_irs", "--m-values", "2,3", "--seed", "5"])
    assert code == cli.EXIT_OK
    rows = read_csv(out / "summary.csv")
    assert [(r["scheme"], r["M"]) for r in rows] == [
        ("fixed", "2"), ("fixed", "3"), ("no_irs", "2"), ("no_irs", "3")]
    doc = json.loads((out / "records.json").read_text())
    assert doc["config"]["seed"] == 5


def test_cli_dump_alloc(tiny_config, tmp_path):
    out = tmp_path / "dump"
    code = cli.main(["dump-alloc", "--config", str(tiny_config), "--out", str(out),
                     "--schemes", "dynamic,fixed", "--realization", "1"])
    assert code == cli.EXIT_OK
    assert (out / "alloc_dynamic_1.csv").exists()
    assert (out / "alloc_fixed_1.csv").exists()


def test_cli_oracle(tmp_path):
    cfg = tmp_path / "o.json"
    cfg.write_text(json.dumps(dict(cli.ORACLE_DEFAULTS, num_realizations=2, I=3)))
    code = cli.main(["oracle", "--config", str(cfg), "--out", str(tmp_path),
                     "--grid-points", "16"])
    assert code == cli.EXIT_OK
    rows = read_csv(tmp_path / "oracle_joint.csv")
    assert len(rows) == 2
    assert all(float(r["ratio"]) > 0.9 for r in rows)


@pytest.mark.parametrize("argv", [
    ["run", "--config", "/does/not/exist.json"],
    ["run", "--schemes", "bogus"],
    ["run", "--m-values", "x"],
    ["run", "--threads", "0"],
])
def test_cli_config_errors(argv, tmp_path):
    assert cli.main(argv + ["--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_cli_oracle_too_large(tmp_path):
    big = tmp_path / "big.json"
    big.write_text(json.dumps({"num_realizations": 1}))
    code = cli.main(["oracle", "--config", str(big), "--out", str(tmp_path)])
    assert code == cli.EXIT_CONFIG


def test_cli_bad_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert cli.main(["run", "--config", str(path)]) == cli.EXIT_CONFIG
    path.write_text(json.dumps({"K": 0}))
    assert cli.main(["run", "--config", str(path)]) == cli.EXIT_CONFIG


def test_cli_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        cli.main(["run", "--unknown-flag"])
    assert exc.value.code == cli.EXIT_CONFIG


def test_cli_runtime_error(tiny_config, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code = cli.main(["run", "--config", str(tiny_config), "--schemes", "no_irs",
                     "--out", str(blocker / "sub")])
    assert code == cli.EXIT_RUNTIME
