"""Command-line driver: ``thinlattice --config run.ini [--output DIR] [--seed N]``.

Every artifact except ``run.log`` is a deterministic function of the
resolved configuration, so two runs with the same config and seed write
byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import platform
import sys
import time
import traceback
import warnings
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .bands import band_path_table, first_band_model, patterned_M, sweep_aleph, upsilon_segments
from .config import ConfigError, RunConfig, parse_config, parse_number
from .floquet import (
    DEFAULT_ETAS,
    compare_asymptotics,
    compute_cell_bands,
    matched_junction_constants,
)
from .friedrichs import kappa_infinite, kappa_table, kappa_truncated, verify_inequality_1d
from .mesh import build_junction_grid
from .nearfield import (
    branch_projection,
    check_symmetry,
    compute_mixed_spectrum,
    compute_mu1,
    extract_decay_amplitude,
)
from .operators import THRESHOLD, assemble_dirichlet, write_matrix_market
from .scattering import compute_scattering_data, scattering_convergence

__all__ = ["main", "run", "Context"]

log = logging.getLogger("thinlattice")

PIPELINE = ("nearfield", "mixed", "scattering", "bands", "friedrichs", "floquet")


def _plain(obj):
    """JSON-safe copy: numpy scalars/arrays unwrapped, complex as [re, im], non-finite as null."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_plain(float(obj.real)), _plain(float(obj.imag))]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def _cell(x) -> str:
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


class Context:
    """Output directory, artifact registry and values passed between stages."""

    def __init__(self, cfg: RunConfig, out: Path):
        self.cfg = cfg
        self.out = out
        self.artifacts: dict[str, str] = {}
        self.headline: dict = {}
        self.values: dict = {}
        self.done: list[str] = []

    def _register(self, name: str, data: bytes) -> None:
        (self.out / name).write_bytes(data)
        self.artifacts[name] = hashlib.sha256(data).hexdigest()

    def write_json(self, name: str, obj) -> None:
        text = json.dumps(_plain(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"
        self._register(name, text.encode())

    def write_csv(self, name: str, header, rows) -> None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(x) for x in row])
        self._register(name, buf.getvalue().encode())

    def write_text(self, name: str, text: str) -> None:
        self._register(name, text.encode())

    def write_mtx(self, name: str, op) -> None:
        path = self.out / name
        write_matrix_market(op, path)
        self.artifacts[name] = hashlib.sha256(path.read_bytes()).hexdigest()


def _spectral_parameter(text: str):
    if text == "discrete":
        return None
    if text == "threshold":
        return THRESHOLD
    return parse_number(text)


# ----------------------------------------------------------------- stages

def stage_nearfield(ctx: Context) -> None:
    c = ctx.cfg.section("nearfield")
    seed = ctx.cfg["run.seed"]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        mode = compute_mu1(c["R"], tuple(c["spacings"]), tol=ctx.cfg["solver.eig_tol"], seed=seed)
    defects = check_symmetry(mode)
    fit = extract_decay_amplitude(mode, cut_correction=c["cut_correction"])
    rec = mode.to_record()
    rec.update({
        "symmetry_defects": defects,
        "decay_fit": {
            "K": fit.K, "beta_fit": fit.beta_fit, "beta_rel_error": fit.beta_rel_error,
            "K_branches": fit.K_branches, "beta_branches": fit.beta_branches,
            "K_spread": fit.K_spread, "window": list(fit.window),
        },
        "one_eigenvalue_below_threshold": bool(mode.second_per_h[-1] > THRESHOLD > mode.mu1),
        "warnings": [str(w.message) for w in caught],
    })
    ctx.write_json("nearfield.json", rec)
    rows = []
    for branch in range(1, 7):
        z, p = branch_projection(mode.grid, mode.vector, branch)
        rows.extend([branch, zz, pp] for zz, pp in zip(z, p))
    ctx.write_csv("nearfield_decay.csv", ["branch", "z", "projection"], rows)
    if ctx.cfg["run.write_mtx"]:
        ctx.write_mtx("dirichlet_finest.mtx", assemble_dirichlet(build_junction_grid(c["R"], mode.spacings[-1])))
    mu1 = mode.extrapolated_mu1 if mode.extrapolated_mu1 is not None else mode.mu1
    ctx.values.update(mu1=mu1, beta1=mode.beta1, K=fit.K)
    ctx.headline.update(mu1=mu1, mu1_finest=mode.mu1, beta1=mode.beta1, K=fit.K, beta_fit=fit.beta_fit)


def stage_mixed(ctx: Context) -> None:
    c = ctx.cfg.section("mixed")
    mixed = compute_mixed_spectrum(c["R"], c["h"], c["k"], tol=ctx.cfg["solver.eig_tol"])
    ctx.write_json("mixed.json", {
        "R": mixed.R, "h": mixed.h, "values": mixed.values, "residuals": mixed.result.residuals,
        "threshold": THRESHOLD, "mu2_exceeds_threshold": mixed.exceeds_threshold,
    })
    ctx.headline["mu2_mixed"] = float(mixed.values[1])


def stage_scattering(ctx: Context) -> None:
    c = ctx.cfg.section("scattering")
    lam = _spectral_parameter(c["spectral_parameter"])
    tol = ctx.cfg["solver.linear_tol"]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        data = compute_scattering_data(c["R"], c["h"], lam, full=c["full"], tol=tol)
    rec = data.to_record()
    rec["warnings"] = [str(w.message) for w in caught]
    rec["imag_within_tol"] = data.max_imag_M <= c["imag_tol"]
    spacings = sorted(set(c["convergence_spacings"]), reverse=True)
    if len(spacings) >= 3:
        runs = [data if math.isclose(h, c["h"]) else compute_scattering_data(c["R"], h, lam, tol=tol)
                for h in spacings]
        conv = scattering_convergence(runs)
        conv["per_h"] = [{"h": d.h, "r": d.r, "t": d.t, "t_perp": d.t_perp,
                          "r_m": d.r_m, "t_m": d.t_m, "t_perp_m": d.t_perp_m} for d in runs]
        rec["convergence"] = conv
    ctx.write_json("scattering.json", rec)
    header = [f"{p}{k}" for k in range(1, 7) for p in ("re_", "im_")]
    ctx.write_csv("S.csv", header, [[x for z in row for x in (z.real, z.imag)] for row in data.S])
    ctx.write_csv("M.csv", [f"m{k}" for k in range(1, 7)], data.M.tolist())
    ctx.values.update(M=data.M)
    ctx.headline.update(r=data.r, t=data.t, t_perp=data.t_perp,
                        r_m=data.r_m, t_m=data.t_m, t_perp_m=data.t_perp_m)


_PLOT_BANDS = """\
# Plot the splitting coefficients along the high-symmetry path.
import csv
import matplotlib.pyplot as plt

with open("band_path.csv") as fh:
    rows = list(csv.DictReader(fh))
s = [float(r["s"]) for r in rows]
for j in (1, 2, 3):
    plt.plot(s, [float(r[f"nu{j}"]) for r in rows], label=f"nu{j}")
plt.xlabel("path length")
plt.ylabel("eigenvalues of A(eta)")
plt.legend()
plt.savefig("band_path.png", dpi=150)
"""

_PLOT_FLOQUET = """\
# Plot the cell eigenvalues against eta index for each eps.
import csv
from collections import defaultdict
import matplotlib.pyplot as plt

data = defaultdict(list)
with open("floquet_bands.csv") as fh:
    for r in csv.DictReader(fh):
        data[float(r["eps"])].append(r)
fig, axes = plt.subplots(1, len(data), figsize=(4 * len(data), 4), squeeze=False)
for ax, (eps, rows) in zip(axes[0], sorted(data.items(), reverse=True)):
    keys = [k for k in rows[0] if k.startswith("lambda")]
    for k in keys:
        ax.plot([float(r[k]) for r in rows], "o-", label=k)
    ax.set_title(f"eps = {eps:.4g}")
    ax.set_xlabel("eta sample")
axes[0][0].legend()
plt.tight_layout()
plt.savefig("floquet_bands.png", dpi=150)
"""


def stage_bands(ctx: Context) -> None:
    c = ctx.cfg.section("bands")
    coeffs = [c["r_m"], c["t_m"], c["t_perp_m"]]
    if all(v is not None for v in coeffs):
        M, source = patterned_M(*coeffs), "config"
    elif any(v is not None for v in coeffs):
        raise ConfigError(["bands.r_m, bands.t_m and bands.t_perp_m must be given together"])
    else:
        if "M" not in ctx.values:
            stage_scattering(ctx)
            ctx.done.append("scattering")
        M, source = ctx.values["M"], "scattering"
    report = sweep_aleph(M, c["n_per_axis"])
    report.upsilon = upsilon_segments(c["eps"], c["p_max"], report.aleph)
    K = c["K"] if c["K"] is not None else ctx.values.get("K")
    beta1 = c["beta1"] if c["beta1"] is not None else ctx.values.get("beta1")
    mu1 = c["mu1"] if c["mu1"] is not None else ctx.values.get("mu1")
    if None not in (K, beta1, mu1):
        lo = first_band_model(c["eps"], (0.0, 0.0, 0.0), K, beta1, mu1)
        hi = first_band_model(c["eps"], (math.pi,) * 3, K, beta1, mu1)
        report.first_band = {"eps": c["eps"], "K": K, "beta1": beta1, "mu1": mu1,
                             "center": lo["center"], "lambda1_eta0": lo["lambda1"],
                             "lambda1_etapi": hi["lambda1"], "half_width_bound": lo["half_width"],
                             "c1": lo["c1"]}
    rec = report.to_record()
    rec["M_source"] = source
    rec["M"] = M
    ctx.write_json("bands.json", rec)
    ctx.write_csv("band_path.csv", ["s", "eta1", "eta2", "eta3", "nu1", "nu2", "nu3"],
                  band_path_table(M, c["path_points"]))
    ctx.write_text("plot_bands.py", _PLOT_BANDS)
    ctx.headline["aleph"] = list(report.aleph)


def stage_friedrichs(ctx: Context) -> None:
    c = ctx.cfg.section("friedrichs")
    seed = ctx.cfg["run.seed"]
    rows = kappa_table(c["a"], c["R"])
    ctx.write_csv("friedrichs.csv", ["a", "R", "kappa"], rows)
    checks = []
    for a in c["a"]:
        checks.append(verify_inequality_1d(a, None, c["n_samples"], c["h"], c["L"], seed=seed).to_record())
        for R in c["R"]:
            checks.append(verify_inequality_1d(a, R, c["n_samples"], c["h"], seed=seed).to_record())
    constants = [kappa_infinite(a).to_record() for a in c["a"]]
    constants += [dict(kappa_truncated(a, R).to_record(), gap=kappa_infinite(a).kappa - kappa_truncated(a, R).kappa)
                  for a in c["a"] for R in c["R"]]
    ctx.write_json("friedrichs.json", {"constants": constants, "inequality_checks": checks,
                                       "half_threshold": math.pi**2 / 2})
    ctx.headline["kappa"] = {repr(float(a)): kappa_infinite(a).kappa for a in c["a"]}


def stage_floquet(ctx: Context) -> None:
    c = ctx.cfg.section("floquet")
    seed = ctx.cfg["run.seed"]
    h_scaled = 1.0 / c["h_ratio"]
    constants = matched_junction_constants(h_scaled, c["R_junction"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        M_matched = compute_scattering_data(c["R_scattering"], h_scaled, tol=ctx.cfg["solver.linear_tol"]).M
    records = {}
    rows = []
    failures = []
    for eps in c["eps"]:
        recs = compute_cell_bands(eps, eps * h_scaled, DEFAULT_ETAS, c["k"], seed=seed)
        records[eps] = recs
        for r in recs:
            if r.ok:
                rows.append(r.to_row())
            else:
                failures.append({"eps": eps, "eta": list(r.eta), "error": r.error})
    report = compare_asymptotics(records, constants, M_matched)
    report["failures"] = failures
    if {"K", "beta1", "mu1"} <= ctx.values.keys():
        # the same bound evaluated with the continuum constants of the nearfield stage
        report["pipeline_constants"] = {k: ctx.values[k] for k in ("K", "beta1", "mu1")}
        report["pipeline_width_bounds"] = [
            2 * 1.5 * first_band_model(e, (0, 0, 0), ctx.values["K"], ctx.values["beta1"], ctx.values["mu1"])["half_width"]
            for e in sorted(records, reverse=True)
        ]
    header = ["eps", "h", "eta1", "eta2", "eta3"] + [f"lambda{j}" for j in range(1, c["k"] + 1)]
    ctx.write_csv("floquet_bands.csv", header, rows)
    ctx.write_json("floquet_report.json", report)
    ctx.write_text("plot_floquet.py", _PLOT_FLOQUET)
    ctx.headline["floquet_trend_ok"] = bool(report["eps2_lambda1_trend_decreasing"])


STAGES = {
    "nearfield": stage_nearfield,
    "mixed": stage_mixed,
    "scattering": stage_scattering,
    "bands": stage_bands,
    "friedrichs": stage_friedrichs,
    "floquet": stage_floquet,
}


# ----------------------------------------------------------------- driver

def _manifest(ctx: Context, status: str, error: str | None = None) -> dict:
    return {
        "package": "thinlattice",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "command": ctx.cfg.command,
        "seed": ctx.cfg["run.seed"],
        "config_hash": ctx.cfg.digest(),
        "config": ctx.cfg.to_dict() | {"run": {k: v for k, v in ctx.cfg.section("run").items() if k != "output"}},
        "status": status,
        "error": error,
        "stages": list(ctx.done),
        "headline": ctx.headline,
        "artifacts": dict(sorted(ctx.artifacts.items())),
    }


def run(cfg: RunConfig) -> int:
    """Execute the configured command; returns the process exit status."""
    out = Path(cfg["run.output"])
    out.mkdir(parents=True, exist_ok=True)
    for stale in ("FAILED",):
        (out / stale).unlink(missing_ok=True)
    handler = logging.FileHandler(out / "run.log", mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO)
    ctx = Context(cfg, out)
    stages = PIPELINE if cfg.command == "all" else (cfg.command,)
    try:
        ctx.write_text("config.ini", cfg.to_ini(include_output=False))
        for name in stages:
            if name in ctx.done:
                continue
            t0 = time.perf_counter()
            log.info("stage %s started", name)
            STAGES[name](ctx)
            ctx.done.append(name)
            log.info("stage %s finished in %.2f s", name, time.perf_counter() - t0)
    except Exception as exc:  # noqa: BLE001 - every failure leaves a marker
        msg = f"{type(exc).__name__}: {exc}"
        log.error("failed: %s\n%s", msg, traceback.format_exc())
        (out / "FAILED").write_text(msg + "\n", encoding="utf-8")
        ctx.write_json("manifest.json", _manifest(ctx, "failed", msg))
        print(f"error: {msg}", file=sys.stderr)
        return 1
    finally:
        log.removeHandler(handler)
        handler.close()
    ctx.write_json("manifest.json", _manifest(ctx, "ok"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thinlattice", description="Spectral computations for the thin cubic lattice.")
    p.add_argument("--config", required=True, help="configuration file (INI sections)")
    p.add_argument("--output", help="output directory (overrides run.output)")
    p.add_argument("--seed", type=int, help="random seed (overrides run.seed)")
    p.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one configuration value; repeatable")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError([f"cannot read {args.config}: {exc.strerror}"]) from exc
        cfg = parse_config(text, validate=False)
        cfg.apply_overrides(args.override)
        if args.output is not None:
            cfg.values["run"]["output"] = args.output
        if args.seed is not None:
            cfg.values["run"]["seed"] = args.seed
        cfg.validate()
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
