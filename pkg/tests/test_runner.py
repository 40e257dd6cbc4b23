import csv
import hashlib
import json

import numpy as np
import pytest

from hse.cli import main
from hse.krylov import pair_flip_components
from hse.runner import (
    ConfigError,
    ExperimentConfig,
    NumericalInvariantError,
    aggregate_instances,
    checkpoint_grid,
    child_seed_sequence,
    load_config,
    parse_initial_states,
    run_experiment,
    worker_count,
)


def small(experiment, **kw):
    base = dict(experiment=experiment, horizon=200, instances=2, per_decade=4)
    base.update(kw)
    return ExperimentConfig.from_dict(base)


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_checkpoint_grid_examples():
    assert checkpoint_grid(10, 10) == list(range(1, 11))
    g = checkpoint_grid(100, 5)
    assert len(g) == 11 and g[0] == 1 and g[-1] == 100
    assert checkpoint_grid(1, 7) == [1]
    with pytest.raises(ValueError):
        checkpoint_grid(0, 3)


@pytest.mark.parametrize("T, n", [(10_000, 30), (12345, 3), (7, 100), (999, 1)])
def test_checkpoint_grid_properties(T, n):
    g = checkpoint_grid(T, n)
    assert g[0] == 1 and g[-1] == T and np.all(np.diff(g) > 0)
    decades = np.log10(T)
    assert len(g) <= n * decades + 2


def test_aggregate_examples():
    one = aggregate_instances([[1.0, 2.0, 3.0]])
    for key in ("mean", "p10", "p90"):
        np.testing.assert_array_equal(one[key], [1, 2, 3])
    same = aggregate_instances(np.full((5, 3), 0.25))
    np.testing.assert_array_equal(same["p90"] - same["p10"], 0)
    draws = np.random.default_rng(0).random((100, 1))
    band = aggregate_instances(draws)
    assert abs(band["p10"][0] - 0.1) < 0.06 and abs(band["p90"][0] - 0.9) < 0.06
    with pytest.raises(ValueError):
        aggregate_instances([[1.0, 2.0], [1.0, 2.0]], grids=[[1, 2], [1, 3]])


def test_aggregate_linear_interpolation():
    band = aggregate_instances(np.arange(11.0)[:, None])
    assert band["p10"][0] == pytest.approx(1.0) and band["p90"][0] == pytest.approx(9.0)


def test_child_seeds_match_spawn():
    spawned = np.random.SeedSequence(77).spawn(3)
    for i, seq in enumerate(spawned):
        a = np.random.default_rng(seq).random(4)
        b = np.random.default_rng(child_seed_sequence(77, i)).random(4)
        np.testing.assert_array_equal(a, b)


def test_initial_state_specs():
    states = parse_initial_states(["zeros", "plus", "basis:0120", "index:5"], 4, 3)
    assert [s[0] for s in states] == ["0000", "++++", "0120", "0012"]
    assert len(parse_initial_states(["all_basis"], 2, 3)) == 9
    for bad in (["basis:01"], ["basis:0003"], ["index:81"], ["haar"]):
        with pytest.raises(ValueError):
            parse_initial_states(bad, 4, 3)


@pytest.mark.parametrize(
    "data",
    [
        {},
        {"experiment": "nope"},
        {"experiment": "gbw", "horizon": 0},
        {"experiment": "gbw", "instances": 0},
        {"experiment": "gbw", "moments": [0, 1]},
        {"experiment": "hsf", "local_dim": 2},
        {"experiment": "gbw", "family": "scar"},
        {"experiment": "gbw", "colour": "red"},
        {"experiment": "gbw", "initial_states": ["basis:01"]},
        {"experiment": "diagnostics", "local_dim": 3, "observable": "sigma_z"},
        {"experiment": "gbw", "horizon": 1.5},
    ],
)
def test_invalid_configs(data):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(data)


def test_precedence(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"experiment": "gbw", "instances": 7, "horizon": 50}))
    config = load_config(path, {"horizon": 20, "seed": None})
    assert (config.instances, config.horizon, config.n_sites, config.seed) == (7, 20, 4, 0)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")


def test_gbw_outputs_and_manifest(tmp_path):
    record = run_experiment(small("gbw"), out=tmp_path)
    files = sorted(p.name for p in tmp_path.iterdir())
    assert files == ["aggregate.csv", "instance_0.csv", "instance_1.csv", "manifest.json"]
    rows = read_csv(tmp_path / "instance_0.csv")
    assert rows[0] == ["initial", "T", "k", "delta_full", "delta_subspace", "bound_lb", "cross_bound"]
    assert rows[1][:4] == ["0000", "1", "1", "0.9375"]
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["complete"] is True
    assert manifest["checkpoints"] == checkpoint_grid(200, 4)
    for name, digest in manifest["files"].items():
        assert hashlib.sha256((tmp_path / name).read_bytes()).hexdigest() == digest
    assert set(manifest["files"]) == set(files) - {"manifest.json"}
    assert record.child_seeds == manifest["child_seeds"]
    agg = read_csv(tmp_path / "aggregate.csv")
    assert agg[0][:6] == ["initial", "T", "k", "delta_full_mean", "delta_full_p10", "delta_full_p90"]


def test_determinism_and_worker_independence(tmp_path, monkeypatch):
    config = small("gbw", instances=3)
    monkeypatch.setenv("HSE_THREADS", "1")
    a = run_experiment(config, out=tmp_path / "a")
    monkeypatch.setenv("HSE_THREADS", "2")
    b = run_experiment(config, out=tmp_path / "b")
    for name in ("aggregate.csv", "instance_2.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert a.csv_text("aggregate") == b.csv_text("aggregate")


def test_worker_count(monkeypatch):
    monkeypatch.setenv("HSE_THREADS", "3")
    assert worker_count(10) == 3 and worker_count(2) == 2
    monkeypatch.setenv("HSE_THREADS", "zero")
    with pytest.raises(ConfigError):
        worker_count(4)


def test_hsf_subspace_columns(tmp_path):
    record = run_experiment(small("hsf", instances=1, horizon=50), out=tmp_path)
    assert (tmp_path / "sectors.json").exists()
    _, rows = record.table("instance_0")
    final = {(r[0], r[2]): r for r in rows if r[1] == 50}
    frozen = final["0101", 1]
    assert frozen[3] == pytest.approx(1 - 1 / 81, abs=1e-12) and abs(frozen[4]) < 1e-12
    assert final["0000", 1][6] == pytest.approx(1 / 15 - 1 / 81)
    dims = {len(pair_flip_components(4, 3).sector_containing(int(lab, 3))) for lab in ("0011", "0012")}
    assert dims == {15, 7}
    assert final["0011", 2][6] == pytest.approx(1 / 120 - 1 / 3321)
    assert final["0012", 2][6] == pytest.approx(1 / 28 - 1 / 3321)


def test_scar_subspace_declared():
    record = run_experiment(small("scar", instances=1, horizon=100))
    _, rows = record.table("instance_0")
    scar = [r for r in rows if r[0] == "0000"]
    other = [r for r in rows if r[0] == "1111" and r[2] == 1]
    assert all(r[4] == 0.0 for r in scar)
    assert other[0][6] == pytest.approx(1 / 240)


def test_dee_and_diagnostics_tables():
    dee = run_experiment(small("dee", instances=1, reference_count=50, repeats=2))
    header, rows = dee.table("instance_0")
    assert header == ["initial", "T", "dee_min", "dee_mean", "dee_max", "m_prime", "epsilon", "seed"]
    assert rows[-1][1] == 200 and rows[-1][5] == 50
    diag = run_experiment(small("diagnostics", horizon=20))
    header, rows = diag.table("instance_1")
    assert header == ["t", "value", "observable", "model", "instance"]
    assert rows[0][:3] == [0, 1.0, "A[sigma_z@2]"] and rows[0][4] == 1
    assert any(r[2] == "S_half[0000]" for r in rows)


def test_krylov_experiment(tmp_path):
    record = run_experiment(ExperimentConfig.from_dict({"experiment": "krylov"}), out=tmp_path)
    assert record.extra["krylov"]["sector_dimensions"] == {"1": 24, "7": 6, "15": 1}
    assert record.extra["krylov"]["formula_agrees"] is True
    assert json.loads((tmp_path / "sectors.json").read_text())["n_sites"] == 4


def test_incomplete_run_is_flagged(tmp_path, monkeypatch):
    import hse.runner as runner

    def broken(*args):
        raise NumericalInvariantError("norm drift")

    monkeypatch.setitem(runner.KERNELS, "dee", (broken, runner.DEE_HEADER))
    with pytest.raises(NumericalInvariantError):
        run_experiment(small("dee", instances=1), out=tmp_path)
    assert json.loads((tmp_path / "manifest.json").read_text())["complete"] is False


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["krylov", "--n", "4", "--d", "3"]) == 0
    assert json.loads(capsys.readouterr().out)["sector_count"] == 31
    assert main(["run", "--experiment", "hsf", "--d", "2"]) == 2
    assert main(["run"]) == 2
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"experiment": "gbw", "instances": 1}))
    out = tmp_path / "out"
    code = main(["run", "--config", str(cfg), "--t-max", "30", "--k", "1,2", "--per-decade", "3", "--out", str(out)])
    assert code == 0
    assert (out / "aggregate.csv").exists()
    assert main(["selftest"]) == 0


def test_cli_numerical_exit(monkeypatch, tmp_path):
    import hse.runner as runner

    def broken(*args):
        raise NumericalInvariantError("leak")

    monkeypatch.setitem(runner.KERNELS, "diagnostics", (broken, runner.DIAG_HEADER))
    assert main(["run", "--experiment", "diagnostics", "--out", str(tmp_path)]) == 3
