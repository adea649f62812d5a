import json
import math

import numpy as np
import pytest

from cavityband.cli import config_hash, csv_bytes, load_config, main, run, ConfigError

LOOPED = {"kappa": 350, "n_atoms": 10000, "u0": 1, "eta": 909.9, "delta_c": 3140}
CAVITY = {"kappa": 350, "n_atoms": 10000, "u0": 1}


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def test_csv_shortest_round_trip():
    data = csv_bytes(["x[1]", "ok[1]"], [(0.1, True), (1 / 3, False), (2, True)]).decode()
    lines = data.splitlines()
    assert lines == ["x[1],ok[1]", "0.1,1", "0.3333333333333333,0", "2,1"]
    assert float(lines[2].split(",")[0]) == 1 / 3


def test_config_errors_name_fields():
    with pytest.raises(ConfigError) as exc:
        load_config({"params": {"kappa": -1, "n_atoms": 10, "u0": 0}}, "band")
    msgs = " ".join(exc.value.errors)
    assert "kappa" in msgs and "u0" in msgs
    with pytest.raises(ConfigError, match="delta_grid"):
        load_config({"params": CAVITY, "delta_grid": [3.0, 1.0, 2.0]}, "lineshape")
    with pytest.raises(ConfigError, match="extra"):
        load_config({"params": CAVITY, "extra": 1}, "band")
    with pytest.raises(ConfigError, match="required"):
        load_config({"params": CAVITY}, "bifmap")


def test_grid_spec_expansion():
    c = load_config({"params": CAVITY, "eta_grid": {"start": 1, "stop": 100, "num": 3, "spacing": "log"},
                     "delta_grid": {"start": 0, "stop": 1, "num": 5}}, "bifmap")
    np.testing.assert_allclose(c["eta_grid"], [1, 10, 100])
    assert len(c["delta_grid"]) == 5


def test_hash_covers_full_precision():
    a = {"params": dict(LOOPED)}
    b = {"params": dict(LOOPED, eta=909.9 + 1e-12)}
    assert config_hash(a, "band") != config_hash(b, "band")
    assert config_hash(dict(a, workers=3), "band") == config_hash(a, "band")


def test_critical_run(tmp_path):
    cfg = write(tmp_path, {"params": CAVITY, "q": 0, "window": [3000, 6000]})
    out = tmp_path / "o"
    assert main(["critical", "--config", cfg, "--out", str(out), "--no-plots"]) == 0
    rows = (out / "critical.csv").read_text().splitlines()
    assert rows[0].startswith("q[1],delta_0[omega_R],eta_cr[omega_R],n_0[1]")
    assert len(rows) == 2
    q, d0, eta, n0, _ = map(float, rows[1].split(","))
    assert eta == pytest.approx(325, rel=0.02) and d0 == pytest.approx(4393.8, rel=0.01)
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "ok" and "critical.csv" in man["outputs"] and man["cached"] is False


def test_band_csv_deterministic_across_workers(tmp_path):
    cfg = write(tmp_path, {"params": LOOPED, "q_grid": {"start": -1, "stop": 1, "num": 9}})
    outs = []
    for w in (1, 3):
        out = tmp_path / f"w{w}"
        assert main(["band", "--config", cfg, "--out", str(out), "--workers", str(w)]) == 0
        outs.append((out / "band.csv").read_bytes())
        assert (out / "band.svg").exists()
    assert outs[0] == outs[1]
    header = outs[0].decode().splitlines()[0]
    for col in ("q[1]", "energy_total[E_R]", "energy_per_atom[E_R]", "n_ph[1]", "mu[E_R]"):
        assert col in header


def test_cache_hit_and_corruption(tmp_path, caplog):
    cfg = write(tmp_path, {"params": CAVITY, "q": 0, "window": [3000, 6000], "plots": False})
    cache = tmp_path / "cache"
    args = ["critical", "--config", cfg, "--cache-dir", str(cache)]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
    mb = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert not ma["cached"] and mb["cached"]
    assert ma["outputs"] == mb["outputs"]
    assert (tmp_path / "a" / "critical.csv").read_bytes() == (tmp_path / "b" / "critical.csv").read_bytes()
    entry = next(cache.iterdir())
    (entry / "critical.csv").write_text("garbage")
    assert main(args + ["--out", str(tmp_path / "c")]) == 0
    assert "corrupted cache entry" in caplog.text
    assert not json.loads((tmp_path / "c" / "manifest.json").read_text())["cached"]
    # cleared directory: miss again
    import shutil

    shutil.rmtree(cache)
    assert main(args + ["--out", str(tmp_path / "d")]) == 0
    assert not json.loads((tmp_path / "d" / "manifest.json").read_text())["cached"]


def test_exit_codes(tmp_path):
    bad = write(tmp_path, {"params": {"kappa": 0, "n_atoms": 1, "u0": 1}}, "bad.json")
    assert main(["band", "--config", bad, "--out", str(tmp_path / "x")]) == 2
    assert json.loads((tmp_path / "x" / "manifest.json").read_text())["status"] == "config-error"
    nf = write(tmp_path, {"params": CAVITY, "q": 0, "window": [100, 200]}, "nf.json")
    assert main(["critical", "--config", nf, "--out", str(tmp_path / "y")]) == 3
    missing = str(tmp_path / "nope.json")
    assert main(["band", "--config", missing]) == 2


def test_internal_error(tmp_path, monkeypatch):
    import cavityband.cli as cli

    def boom(*a, **k):
        raise RuntimeError("boom")

    monkeypatch.setitem(cli.DISPATCH, "scurve", boom)
    status, man = run({"params": CAVITY}, "scurve", tmp_path / "z")
    assert status == 4 and man["status"] == "internal-error"


def test_scurve_and_bifmap(tmp_path):
    cfg = write(tmp_path, {"params": dict(CAVITY, delta_c=1630), "q": 0.95})
    assert main(["scurve", "--config", cfg, "--out", str(tmp_path / "s"), "--no-plots"]) == 0
    man = json.loads((tmp_path / "s" / "manifest.json").read_text())
    assert man["diagnostics"]["crossing_sequence"] == [1, 3, 5, 3, 1]
    cfg = write(tmp_path, {"params": CAVITY, "q": 0.95, "delta_grid": {"start": 1000, "stop": 2500, "num": 21},
                           "eta_grid": {"start": 700, "stop": 1300, "num": 21}}, "m.json")
    assert main(["bifmap", "--config", cfg, "--out", str(tmp_path / "m")]) == 0
    assert (tmp_path / "m" / "bifmap_folds.csv").exists()
    counts = {int(r.split(",")[2]) for r in (tmp_path / "m" / "bifmap.csv").read_text().splitlines()[1:]}
    assert counts == {1, 3, 5}


def test_lineshape_stability_swallowtail(tmp_path):
    cfg = write(tmp_path, {"params": LOOPED, "delta_grid": [1000, 2000, 3000, 4000], "q_grid": [0.0]})
    for cmd in ("lineshape", "stability"):
        assert main([cmd, "--config", cfg, "--out", str(tmp_path / cmd), "--no-plots"]) == 0
    rows = (tmp_path / "stability" / "stability.csv").read_text().splitlines()[1:]
    assert sum(r.split(",")[7] == "0" for r in rows) == 1
    cfg = write(tmp_path, {"params": {"kappa": 1, "n_atoms": 100, "u0": 1}, "q": 0.69}, "sw.json")
    assert main(["swallowtail", "--config", cfg, "--out", str(tmp_path / "sw"), "--no-plots"]) == 0
    rows = (tmp_path / "sw" / "swallowtail.csv").read_text().splitlines()[1:]
    assert len(rows) == 2 and all("no butterfly" in r for r in rows)


def test_validate(tmp_path):
    cfg = write(tmp_path, {"params": dict(LOOPED, delta_c=1350), "q_grid": {"start": -1, "stop": 1, "num": 5}})
    assert main(["validate", "--config", cfg, "--out", str(tmp_path / "v")]) == 0
    rows = (tmp_path / "v" / "validate.csv").read_text().splitlines()[1:]
    assert all(r.endswith(",1") for r in rows)


def test_red_detuned_flag(tmp_path):
    red = {"kappa": 350, "n_atoms": 10000, "u0": -1, "eta": 910, "delta_c": -7400}
    cfg = write(tmp_path, {"params": red, "q_grid": [0.0], "flags": {"red_detuned": True}})
    assert main(["band", "--config", cfg, "--out", str(tmp_path / "r"), "--no-plots"]) == 0
    n = sorted(float(r.split(",")[7]) for r in (tmp_path / "r" / "band.csv").read_text().splitlines()[1:])
    assert n == pytest.approx([0.15238, 4.06979, 5.52655], rel=1e-4)
    bad = write(tmp_path, {"params": LOOPED, "flags": {"red_detuned": True}}, "b.json")
    assert main(["band", "--config", bad, "--out", str(tmp_path / "rb")]) == 2


def test_variational_method_matches(tmp_path):
    base = {"params": LOOPED, "q_grid": [0.0, 0.5], "plots": False}
    outs = []
    for method in ("self-consistent", "variational"):
        cfg = write(tmp_path, dict(base, flags={"method": method}), f"{method}.json")
        assert main(["band", "--config", cfg, "--out", str(tmp_path / method)]) == 0
        outs.append([float(r.split(",")[5]) for r in (tmp_path / method / "band.csv").read_text().splitlines()[1:]])
    np.testing.assert_allclose(outs[1], outs[0], rtol=1e-9)
