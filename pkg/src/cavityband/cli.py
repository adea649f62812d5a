"""Batch front end: ``cavityband <command> --config run.json [--out DIR]``.

Every run writes ``<out>/<command>.csv`` (plus a few companion CSVs for some
commands), ``<out>/manifest.json`` and, unless disabled, ``<out>/<command>.svg``.

Exit codes: 0 success, 2 configuration error, 3 computation inconclusive
(no result, or a validation check failed), 4 internal error.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import logging
import math
import os
import shutil
import sys
from importlib import resources
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from . import __version__
from .bands import band_sweep, cross_validate, edge_slopes, loop_endpoints, method1_extremize
from .bistability import (
    bifurcation_map,
    critical_points_numeric,
    crossing_counts,
    eta_cr_analytic_shallow,
)
from .bloch import overlap_derivatives, solve_bloch
from .catastrophe import butterfly_check, find_q_sw, swallowtail_scan, transversality_rank_check
from .errors import (
    CavityBandError,
    DegenerateWindow,
    ExtremizationFailure,
    InconclusiveError,
    NotFoundError,
    ParameterError,
    ValidationFailure,
)
from .model import SystemParams, validate_params
from .stability import classify_band
from .steady_state import find_branches, find_branches_red_detuned, input_output_curve, lineshape_sweep

log = logging.getLogger("cavityband")

COMMANDS = ("lineshape", "band", "scurve", "bifmap", "critical", "swallowtail", "stability", "validate")
EXIT_OK, EXIT_CONFIG, EXIT_INCONCLUSIVE, EXIT_INTERNAL = 0, 2, 3, 4
# keys that change how a run executes but not what it produces
RUNTIME_KEYS = ("workers", "cache_dir")


class ConfigError(CavityBandError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


# ---------------------------------------------------------------- config


def _schema():
    return json.loads(resources.files("cavityband").joinpath("config_schema.json").read_text())


def _grid(spec, name):
    if isinstance(spec, dict):
        if spec.get("spacing", "linear") == "log":
            if spec["start"] <= 0 or spec["stop"] <= 0:
                raise ConfigError([f"{name}: log spacing needs positive start and stop"])
            g = np.geomspace(spec["start"], spec["stop"], spec["num"])
        else:
            g = np.linspace(spec["start"], spec["stop"], spec["num"])
    else:
        g = np.asarray(spec, dtype=float)
    if not np.all(np.isfinite(g)):
        raise ConfigError([f"{name}: grid values must be finite"])
    if np.any(np.diff(g) < 0):
        raise ConfigError([f"{name}: grid must be sorted ascending"])
    return g


def load_config(cfg: dict, command: str | None = None) -> dict:
    """Schema-check ``cfg`` and return a normalized copy with grids expanded.

    Raises ConfigError listing every problem with its field path.
    """
    errors = []
    for err in sorted(Draft202012Validator(_schema()).iter_errors(cfg), key=lambda e: list(e.path)):
        path = ".".join(str(x) for x in err.path) or "<root>"
        errors.append(f"{path}: {err.message}")
    if errors:
        raise ConfigError(errors)
    cmd = command or cfg.get("command")
    if cmd is None:
        raise ConfigError(["command: no command given on the command line or in the config"])
    if cfg.get("command") not in (None, cmd):
        raise ConfigError([f"command: config says {cfg['command']!r} but {cmd!r} was requested"])
    pr = dict(cfg["params"])
    params = SystemParams(
        kappa=float(pr["kappa"]), n_atoms=float(pr["n_atoms"]), u0=float(pr["u0"]),
        eta=float(pr.get("eta", 0.0)), delta_c=float(pr.get("delta_c", 0.0)),
    )
    try:
        validate_params(params)
    except ParameterError as exc:
        raise ConfigError([f"params.{m}" for m in exc.errors]) from None
    out = {"command": cmd, "params": params, "band": cfg.get("band", 0)}
    q = float(cfg.get("q", 0.0))
    if not -1 <= q <= 1:
        errors.append("q: must lie in [-1, 1]")
    out["q"] = q
    for name in ("q_grid", "delta_grid", "eta_grid", "nph_grid"):
        if name in cfg:
            try:
                out[name] = _grid(cfg[name], name)
            except ConfigError as exc:
                errors.extend(exc.errors)
    if "q_grid" in out and np.any(np.abs(out["q_grid"]) > 1):
        errors.append("q_grid: values must lie in [-1, 1]")
    out["R"] = cfg.get("truncation")
    out["J"] = cfg.get("perturbation_order")
    if out["R"] is not None and out["J"] is not None and out["J"] >= out["R"]:
        errors.append("perturbation_order: must be smaller than truncation")
    out["window"] = tuple(cfg["window"]) if "window" in cfg else None
    flags = {"analytic_constant": "derived", "red_detuned": False, "method": "self-consistent"}
    flags.update(cfg.get("flags", {}))
    if flags["red_detuned"] and params.u0 >= 0:
        errors.append("flags.red_detuned: requires params.u0 < 0")
    out["flags"] = flags
    out["plots"] = cfg.get("plots", True)
    need = {
        "lineshape": ["delta_grid"],
        "bifmap": ["delta_grid", "eta_grid"],
    }
    for name in need.get(cmd, []):
        if name not in out:
            errors.append(f"{name}: required for command {cmd!r}")
    if errors:
        raise ConfigError(errors)
    return out


def config_hash(cfg: dict, command: str) -> str:
    """SHA-256 of the canonical JSON of the config (runtime knobs excluded)."""
    body = {k: v for k, v in cfg.items() if k not in RUNTIME_KEYS}
    body["command"] = command
    text = json.dumps(body, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(text.encode()).hexdigest()


# ---------------------------------------------------------------- output


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def csv_bytes(header, rows) -> bytes:
    """CSV text with shortest round-trip floats; header names carry units."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue().encode()


def _sha(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class _Artifacts:
    """Collects output files in memory; the single writer flushes them."""

    def __init__(self):
        self.files: dict[str, bytes] = {}
        self.diagnostics: dict = {}

    def csv(self, name, header, rows):
        self.files[name] = csv_bytes(header, rows)

    def svg(self, name, draw):
        try:
            import matplotlib

            matplotlib.use("Agg")
            import matplotlib.pyplot as plt
        except ImportError:  # pragma: no cover
            log.warning("matplotlib unavailable; skipping %s", name)
            return
        plt.rcParams["svg.hashsalt"] = "cavityband"
        fig, ax = plt.subplots(figsize=(6, 4))
        draw(ax)
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
        self.files[name] = buf.getvalue().encode()


# ---------------------------------------------------------------- commands


def _solver(c):
    return find_branches_red_detuned if c["flags"]["red_detuned"] else find_branches


def _cmd_lineshape(c, art, workers):
    res = lineshape_sweep(c["params"], c["q"], c["band"], c["delta_grid"], workers=workers,
                          R=c["R"], solver=_solver(c))
    rows = []
    for dc, bs, up, down in zip(res.delta_grid, res.sets, res.up_trace, res.down_trace):
        for k, b in enumerate(bs.branches):
            rows.append((dc, bs.count, k, b.n_ph, b.v, b.f, b.mu, b.energy_total, b.phase,
                         b.n_ph == up, b.n_ph == down))
    art.csv("lineshape.csv", ["delta_c[omega_R]", "count[1]", "branch[1]", "n_ph[1]", "v[E_R]", "f[1]",
                              "mu[E_R]", "energy_total[E_R]", "phase[rad]", "on_up_trace[1]",
                              "on_down_trace[1]"], rows)
    art.diagnostics["truncation"] = res.sets[0].truncation
    art.diagnostics["max_count"] = int(res.counts.max())
    if c["plots"]:
        def draw(ax):
            xs = [r[0] for r in rows]
            ax.plot(xs, [r[3] for r in rows], ".", ms=2, color="0.6", label="all branches")
            ax.plot(res.delta_grid, res.up_trace, "-", lw=1, label="upward sweep")
            ax.plot(res.delta_grid, res.down_trace, "--", lw=1, label="downward sweep")
            ax.set_xlabel("Delta_c [omega_R]")
            ax.set_ylabel("n_ph")
            ax.legend()
        art.svg("lineshape.svg", draw)
    return EXIT_OK


def _q_grid(c, default_num=41):
    return c.get("q_grid", np.linspace(-1.0, 1.0, default_num))


def _cmd_band(c, art, workers):
    qs = _q_grid(c)
    d = band_sweep(c["params"], c["band"], qs, workers=workers, R=c["R"], solver=_solver(c))
    variational = c["flags"]["method"] == "variational"
    rows = []
    for i, bs in enumerate(d.sets):
        ext = method1_extremize(float(qs[i]), c["params"], band=c["band"], seeds=bs) if variational else None
        if ext is not None and len(ext) != bs.count:
            raise ValidationFailure(f"methods disagree on branch count at q={qs[i]}", q=float(qs[i]))
        for k, pt in enumerate(d.points_at(i)):
            E = ext[k].energy if ext is not None else pt.energy_total
            rows.append((pt.q, k, pt.track, pt.label, pt.detached, E, E / c["params"].n_atoms,
                         pt.n_ph, pt.v, pt.mu))
    art.csv("band.csv", ["q[1]", "branch[1]", "track[1]", "label", "detached[1]", "energy_total[E_R]",
                         "energy_per_atom[E_R]", "n_ph[1]", "v[E_R]", "mu[E_R]"], rows)
    art.diagnostics["truncation"] = d.sets[0].truncation
    art.diagnostics["loop_endpoints"] = [
        {"q": e.q, "n_ph": e.n_ph} for e in loop_endpoints(d)
    ]
    art.diagnostics["detached_tracks"] = sorted(int(t) for t in d.detached)
    if c["plots"]:
        def draw(ax):
            for t, visits in sorted(d.tracks.items()):
                pts = [d.sets[i].branches[j] for i, j in visits]
                ax.plot([qs[i] for i, _ in visits], [b.energy_total / c["params"].n_atoms for b in pts],
                        "-" if t not in d.detached else "--", lw=1)
            ax.set_xlabel("q")
            ax.set_ylabel("E/N [E_R]")
        art.svg("band.svg", draw)
    return EXIT_OK


def _cmd_scurve(c, art, workers):
    p = c["params"]
    grid = c.get("nph_grid")
    if grid is None:
        grid = np.linspace(0.0, max(4.0 * p.n_max, 10.0), 2001)
    n_max, n = input_output_curve(p, c["q"], c["band"], grid, R=c["R"])
    rows = [(a, b, p.kappa * math.sqrt(b)) for a, b in zip(n, n_max)]
    art.csv("scurve.csv", ["n_ph[1]", "n_max[1]", "eta[omega_R]"], rows)
    levels = np.linspace(0.0, float(n_max.max()), 401)[1:-1]
    counts = crossing_counts(n_max, levels)
    art.diagnostics["crossing_sequence"] = [int(x) for i, x in enumerate(counts) if i == 0 or x != counts[i - 1]]
    if c["plots"]:
        def draw(ax):
            ax.plot(n_max, n, "-", lw=1)
            ax.set_xlabel("n_max = eta^2/kappa^2")
            ax.set_ylabel("n_ph")
        art.svg("scurve.svg", draw)
    return EXIT_OK


def _cmd_bifmap(c, art, workers):
    m = bifurcation_map(c["q"], c["params"], c["delta_grid"], c["eta_grid"], c["band"], R=c["R"])
    rows = []
    for i, eta in enumerate(m.eta_grid):
        for j, dc in enumerate(m.delta_grid):
            rows.append((dc, eta, int(m.counts[i, j])))
    art.csv("bifmap.csv", ["delta_c[omega_R]", "eta[omega_R]", "count[1]"], rows)
    frows = [(k, x, y) for k, line in enumerate(m.folds) for x, y in line]
    art.csv("bifmap_folds.csv", ["polyline[1]", "delta_c[omega_R]", "eta[omega_R]"], frows)
    art.diagnostics["cusps"] = [{"delta_c": float(x), "eta": float(y)} for x, y in m.cusps]
    art.diagnostics["counts_present"] = sorted(int(x) for x in np.unique(m.counts))
    if c["plots"]:
        def draw(ax):
            ax.pcolormesh(m.delta_grid, m.eta_grid, m.counts, shading="nearest", cmap="Greys")
            for line in m.folds:
                ax.plot(line[:, 0], line[:, 1], "-", lw=1)
            ax.set_xlabel("Delta_c [omega_R]")
            ax.set_ylabel("eta [omega_R]")
        art.svg("bifmap.svg", draw)
    return EXIT_OK


def _cmd_critical(c, art, workers):
    qs = c.get("q_grid", np.array([c["q"]]))
    rows = []
    for q in qs:
        pts = critical_points_numeric(float(q), c["params"], c["window"], c["band"], R=c["R"])
        if not pts:
            raise NotFoundError(f"no bistability onset at q={q} in window {c['window']}")
        cp = pts[0]
        an = eta_cr_analytic_shallow(float(q), c["params"], c["flags"]["analytic_constant"]) if abs(q) < 1 else 0.0
        rows.append((float(q), cp.delta_0, cp.eta_cr, cp.n_0, an))
        art.diagnostics.setdefault("residuals", []).append(list(cp.residuals))
    art.csv("critical.csv", ["q[1]", "delta_0[omega_R]", "eta_cr[omega_R]", "n_0[1]",
                             "eta_cr_shallow[omega_R]"], rows)
    if c["plots"] and len(rows) > 1:
        def draw(ax):
            ax.plot([r[0] for r in rows], [r[2] for r in rows], "o-", label="numeric")
            ax.plot([r[0] for r in rows], [r[4] for r in rows], "--", label="shallow law")
            ax.set_xlabel("q")
            ax.set_ylabel("eta_cr [omega_R]")
            ax.legend()
        art.svg("critical.svg", draw)
    return EXIT_OK


def _cmd_swallowtail(c, art, workers):
    p = c["params"]
    qs = c.get("q_grid", np.array([c["q"]]))
    rows = []
    for q in qs:
        for pt in swallowtail_scan(float(q), p.n_atoms, p.kappa, c["band"]):
            try:
                verdict = butterfly_check(pt).verdict
            except InconclusiveError:
                verdict = "inconclusive"
            try:
                rank = transversality_rank_check(pt).rank
            except InconclusiveError:
                rank = -1
            rows.append((pt.q, pt.v, pt.delta_over_NU0, pt.inv_NU0_sq, pt.u0, pt.delta_c,
                         pt.delta_c_over_kappa, pt.eta, pt.n_ph, pt.residual3, pt.err3, pt.residual4,
                         pt.err4, verdict, rank, pt.inconclusive))
    art.csv("swallowtail.csv", ["q[1]", "v[E_R]", "delta_over_NU0[1]", "inv_NU0_sq[1]", "u0[omega_R]",
                                "delta_c[omega_R]", "delta_c_over_kappa[1]", "eta_over_kappa[1]", "n_ph[1]",
                                "residual3[1]", "err3[1]", "residual4[1]", "err4[1]", "butterfly",
                                "rank[1]", "inconclusive[1]"], rows)
    if c["window"] is not None:
        art.diagnostics["q_sw"] = find_q_sw(c["window"], p.n_atoms, p.kappa, band=c["band"])
    art.diagnostics["points"] = len(rows)
    if c["plots"] and rows:
        def draw(ax):
            ax.plot([r[0] for r in rows], [r[3] for r in rows], "o")
            ax.set_xlabel("q")
            ax.set_ylabel("kappa^2/(N U0)^2")
        art.svg("swallowtail.svg", draw)
    return EXIT_OK


def _cmd_stability(c, art, workers):
    qs = c.get("q_grid", np.array([c["q"]]))
    d = band_sweep(c["params"], c["band"], qs, workers=workers, R=c["R"], solver=_solver(c))
    reps = classify_band(d, c["J"], workers=workers)
    rows = []
    for pt, r in zip(d.points, reps):
        rows.append((pt.q, pt.track, pt.label, pt.n_ph, pt.energy_total, r.min_eig_A, r.max_abs_imag_sigmaA,
                     r.energetically_stable, r.dynamically_stable, r.J, "|".join(r.flags)))
    art.csv("stability.csv", ["q[1]", "track[1]", "label", "n_ph[1]", "energy_total[E_R]",
                              "min_eig_A[omega_R]", "max_abs_imag_sigmaA[omega_R]", "energetic[1]",
                              "dynamic[1]", "J[1]", "flags"], rows)
    art.diagnostics["unstable_points"] = sum(1 for r in reps if not r.stable)
    if c["plots"]:
        def draw(ax):
            for stable, style in ((True, "k."), (False, "rx")):
                sel = [(pt.q, pt.energy_total / c["params"].n_atoms) for pt, r in zip(d.points, reps)
                       if r.stable == stable]
                if sel:
                    ax.plot(*zip(*sel), style, ms=3, label="stable" if stable else "unstable")
            ax.set_xlabel("q")
            ax.set_ylabel("E/N [E_R]")
            ax.legend()
        art.svg("stability.svg", draw)
    return EXIT_OK


def _cmd_validate(c, art, workers):
    p = c["params"]
    qs = c.get("q_grid", np.linspace(-1.0, 1.0, 21))
    checks = []
    try:
        worst = cross_validate(qs, p, c["band"], R=c["R"], workers=workers)
        checks.append(("method_agreement", worst, 1e-6, worst < 1e-6))
        checks.append(("branch_counts_equal", 1.0, 1.0, True))
    except (ValidationFailure, ExtremizationFailure) as exc:
        checks.append(("branch_counts_equal", 0.0, 1.0, False))
        log.error("%s", exc)
    rng = np.random.default_rng(0)
    sym = flip = hf = 0.0
    hf_ok = True
    for _ in range(10):
        q, v = rng.uniform(-0.95, 0.95), rng.uniform(0.0, 20.0)
        f = solve_bloch(q, v).f
        sym = max(sym, abs(f - solve_bloch(-q, v).f))
        flip = max(flip, abs(solve_bloch(q, -v).f - (1.0 - f)))
        d = overlap_derivatives(q, v, order=1)
        # d mu/dv from the same derivative machinery applied to mu
        from .numerics import derivative_tower
        from .bloch import band_gap, overlap_table
        vals, errs = derivative_tower(lambda x: overlap_table(q, x, 0, with_mu=True)[1], [v],
                                      0.5 * band_gap(q, v), max_order=1)
        gap = abs(vals[1, 0] - d.f)
        hf = max(hf, gap)
        hf_ok &= gap <= errs[1, 0] + 1e-12
    checks.append(("parity_f", sym, 1e-12, sym <= 1e-12))
    checks.append(("sign_flip_f", flip, 1e-10, flip <= 1e-10))
    checks.append(("hellmann_feynman", hf, 0.0, bool(hf_ok)))
    res = 0.0
    for q in qs[:: max(1, len(qs) // 5)]:
        bs = find_branches(float(q), p, c["band"], R=c["R"])
        for b in bs.branches:
            res = max(res, abs(b.residual(p)) / max(p.eta**2, 1e-300))
    checks.append(("self_consistency", res, 1e-8, res <= 1e-8))
    art.csv("validate.csv", ["check", "value[1]", "tolerance[1]", "passed[1]"], checks)
    art.diagnostics["failed"] = [ch[0] for ch in checks if not ch[3]]
    return EXIT_OK if all(ch[3] for ch in checks) else EXIT_INCONCLUSIVE


DISPATCH = {
    "lineshape": _cmd_lineshape,
    "band": _cmd_band,
    "scurve": _cmd_scurve,
    "bifmap": _cmd_bifmap,
    "critical": _cmd_critical,
    "swallowtail": _cmd_swallowtail,
    "stability": _cmd_stability,
    "validate": _cmd_validate,
}


# ---------------------------------------------------------------- cache


def cache_lookup(cache_dir, digest):
    """Artifacts stored under ``cache_dir/digest`` or None on a miss.

    An entry whose files are missing or fail their checksum is a miss and
    logs a warning.
    """
    if cache_dir is None:
        return None
    entry = Path(cache_dir) / digest
    index = entry / "entry.json"
    if not index.exists():
        return None
    try:
        meta = json.loads(index.read_text())
        files = {}
        for name, sha in meta["outputs"].items():
            data = (entry / name).read_bytes()
            if _sha(data) != sha:
                raise ValueError(f"checksum mismatch for {name}")
            files[name] = data
        return files, meta
    except Exception as exc:
        log.warning("corrupted cache entry %s (%s); recomputing", entry, exc)
        return None


def cache_store(cache_dir, digest, files, meta):
    entry = Path(cache_dir) / digest
    entry.mkdir(parents=True, exist_ok=True)
    for name, data in files.items():
        (entry / name).write_bytes(data)
    body = dict(meta)
    body["outputs"] = {k: _sha(v) for k, v in files.items()}
    (entry / "entry.json").write_text(json.dumps(body, indent=2, sort_keys=True))


# ---------------------------------------------------------------- driver


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def run(cfg: dict, command: str | None = None, out_dir="cavityband_out", workers: int | None = None,
        plots: bool | None = None, cache_dir=None):
    """Execute one configuration and write its artifacts.

    Returns (exit_status, manifest dict).
    """
    out = Path(out_dir)
    started = _now()
    manifest = {"tool": "cavityband", "version": __version__, "started": started, "cached": False}
    try:
        c = load_config(cfg, command)
    except ConfigError as exc:
        for m in exc.errors:
            log.error("config error: %s", m)
        manifest.update(status="config-error", errors=exc.errors, finished=_now(), outputs={})
        _write_manifest(out, manifest)
        return EXIT_CONFIG, manifest
    cmd = c["command"]
    if plots is not None:
        c["plots"] = plots
        cfg = dict(cfg, plots=plots)
    digest = config_hash(cfg, cmd)
    manifest.update(command=cmd, config_hash=digest, config=cfg)
    if workers is None:
        workers = cfg.get("workers") or os.cpu_count() or 1
    cache_dir = cache_dir or cfg.get("cache_dir")

    hit = cache_lookup(cache_dir, digest)
    if hit is not None:
        files, meta = hit
        status = meta.get("status_code", EXIT_OK)
        manifest.update(cached=True, diagnostics=meta.get("diagnostics", {}), status=meta.get("status", "ok"))
    else:
        art = _Artifacts()
        try:
            status = DISPATCH[cmd](c, art, workers)
            manifest["status"] = "ok" if status == EXIT_OK else "check-failed"
        except (NotFoundError, InconclusiveError, DegenerateWindow, ValidationFailure,
                ExtremizationFailure) as exc:
            log.error("no result: %s", exc)
            status = EXIT_INCONCLUSIVE
            manifest.update(status="inconclusive", message=str(exc))
        except Exception as exc:  # noqa: BLE001 - reported as internal error
            log.exception("internal error")
            manifest.update(status="internal-error", message=repr(exc), finished=_now(), outputs={})
            _write_manifest(out, manifest)
            return EXIT_INTERNAL, manifest
        files = art.files
        manifest["diagnostics"] = _jsonable(art.diagnostics)
        if cache_dir is not None and status in (EXIT_OK,):
            cache_store(cache_dir, digest, files,
                        {"status": manifest["status"], "status_code": status,
                         "diagnostics": manifest["diagnostics"]})
    out.mkdir(parents=True, exist_ok=True)
    for name, data in sorted(files.items()):
        (out / name).write_bytes(data)
    manifest["outputs"] = {name: _sha(data) for name, data in sorted(files.items())}
    manifest["finished"] = _now()
    _write_manifest(out, manifest)
    return status, manifest


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    return x


def _write_manifest(out: Path, manifest):
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="cavityband", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", default="cavityband_out", help="output directory")
    ap.add_argument("--workers", type=int, default=None, help="worker threads (default: all cores)")
    ap.add_argument("--no-plots", action="store_true", help="skip SVG output")
    ap.add_argument("--cache-dir", default=None, help="reuse artifacts of identical configs")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        log.error("config error: cannot read %s: %s", args.config, exc)
        return EXIT_CONFIG
    if not isinstance(cfg, dict):
        log.error("config error: top level must be a JSON object")
        return EXIT_CONFIG
    if args.workers is not None and args.workers < 1:
        log.error("config error: --workers must be >= 1")
        return EXIT_CONFIG
    status, _ = run(cfg, args.command, args.out, args.workers, False if args.no_plots else None,
                    args.cache_dir)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
