"""Experiment recipes behind the command line.

Every recipe splits its work into per-realization tasks that are pure
functions of (config, realization index).  Tasks may run in worker
processes; results are reduced in realization order, so outputs do not
depend on the worker count.
"""
from __future__ import annotations

import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .config import config_hash, torus_from
from .disorder import CouplingLaw, SingleSiteProfile, lorentzian, rescaled_law, sample
from .dynamics import BUMP_CUTOFF, EnergyBump, make_series, moment_series
from .hall import bott_index, default_window, theta_windowed, SwitchPair
from .io import write_csv, write_json
from .lattice import build_hamiltonian, quantize_field
from .localization import DecayGate, decay_profile, mobility_proxy
from .spectral import (NumericalError, band_report, clean_levels, density_of_states, diagonalize,
                       fermi_projection, wegner_from_counts)


class GuardFailure(RuntimeError):
    """An asserted invariant failed on emitted data."""


# shared plumbing -------------------------------------------------------------


def disorder_model(cfg, B):
    """(law, profile, lambda) of a resolved config at field B."""
    d = cfg["disorder"]
    lw = d["law"]
    if lw["kind"] == "uniform":
        law = CouplingLaw.uniform(lw["M1"], lw["M2"])
    else:
        law = rescaled_law(lorentzian, lw["family_lambda"], lw["cutoff_b"])
    prof = SingleSiteProfile(**d["profile"])
    return law, prof, d["lambda_over_B"] * B


def decompose(torus, law, profile, lam, seed, r, ceiling, vectors=True):
    """Sample realization r and diagonalize below ``ceiling``."""
    dis = None if lam == 0 else sample(seed, law, profile, torus, r)
    H = build_hamiltonian(torus, dis, lam)
    k = int(torus.flux_quanta * max(1.0, ceiling / (2 * torus.field)) + 16)
    return diagonalize(H, ceiling=ceiling, vectors=vectors, k_hint=k)


def run_tasks(fn, tasks, workers):
    """Map ``fn`` over ``tasks``; results come back in task order."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, tasks, chunksize=1))


def fsum_mean(rows):
    """Elementwise mean over the first axis with exactly rounded sums."""
    a = np.asarray(rows, dtype=float)
    if a.ndim == 1:
        return math.fsum(a) / len(a)
    flat = a.reshape(len(a), -1)
    return np.array([math.fsum(flat[:, j]) for j in range(flat.shape[1])]).reshape(a.shape[1:]) / len(a)


def stderr(values):
    v = np.asarray(values, dtype=float)
    if len(v) < 2:
        return 0.0
    return float(np.std(v, ddof=1) / math.sqrt(len(v)))


class Run:
    """Output directory, manifest and timing for one command invocation."""

    def __init__(self, command, cfg, out=None):
        self.command = command
        self.cfg = cfg
        self.out = out or cfg["output"]["directory"]
        self.formats = cfg["output"]["formats"]
        self.t0 = time.perf_counter()
        self.timings = {}
        self.tolerances = {}
        os.makedirs(self.out, exist_ok=True)

    @property
    def seeds(self):
        s = self.cfg["run"]["seed"]
        return [[s, r] for r in range(self.cfg["run"]["realizations"])]

    def manifest(self, final=False):
        return {
            "command": self.command,
            "config": self.cfg,
            "config_hash": config_hash(self.cfg),
            "code_version": __version__,
            "seeds": self.seeds,
            "tolerances": self.tolerances,
            "workers": self.cfg["run"]["workers"],
            "wall_times": self.timings if final else None,
        }

    def begin(self):
        write_json(self.path("manifest.json"), self.manifest())

    def lap(self, label):
        self.timings[label] = round(time.perf_counter() - self.t0, 3)

    def finish(self):
        self.lap("total")
        write_json(self.path("manifest.json"), self.manifest(final=True))

    def path(self, name):
        return os.path.join(self.out, name)

    def emit_json(self, name, obj):
        if "json" in self.formats:
            write_json(self.path(name), obj)

    def emit_csv(self, name, header, rows):
        if "csv" in self.formats:
            write_csv(self.path(name), header, rows)


# spectrum ------------------------------------------------------------------


def _spectrum_task(args):
    torus, law, prof, lam, seed, r, ceiling = args
    return decompose(torus, law, prof, lam, seed, r, ceiling, vectors=False).eigenvalues


def cmd_spectrum(cfg, out=None):
    torus = torus_from(cfg["model"])
    torus.check_resolution()
    run = Run("spectrum", cfg, out)
    law, prof, lam = disorder_model(cfg, torus.field)
    clean = clean_levels(torus, cfg["spectrum"]["n_levels"])
    run.tolerances = {"eps_disc": clean.eps_disc, "ceiling": clean.ceiling}
    run.begin()
    seed, R = cfg["run"]["seed"], cfg["run"]["realizations"]
    tasks = [(torus, law, prof, lam, seed, r, clean.ceiling) for r in range(R)]
    spectra = run_tasks(_spectrum_task, tasks, cfg["run"]["workers"])
    run.lap("eigensolves")
    reports = [band_report(_Eig(E), clean, lam, law).to_dict() for E in spectra]
    summary = {
        "clean_levels": clean.means.tolist(),
        "lambda": lam,
        "contained": all(r["contained"] for r in reports),
        "disjoint": all(r["disjoint"] for r in reports),
        "overlap": any(r["overlap"] for r in reports),
        "mean_gaps": [fsum_mean([r["bands"][n]["gap_to_next"] for r in reports])
                      for n in range(len(clean.means) - 1)],
    }
    run.emit_json("band_report.json", {"summary": summary, "realizations": reports, "torus": torus.describe()})
    edges = np.linspace(0.0, clean.ceiling, cfg["spectrum"]["dos_bins"] + 1)
    dos, err = density_of_states(spectra, edges, torus.side_length**2)
    run.emit_csv("dos.csv", ["E_lo", "E_hi", "density", "stderr"],
                 zip(edges[:-1], edges[1:], dos, err))
    run.finish()
    return summary


class _Eig:
    """Eigenvalue-only stand-in accepted by band_report."""

    def __init__(self, E):
        self.eigenvalues = np.asarray(E)


# hall -----------------------------------------------------------------------


def _hall_task(args):
    torus, law, prof, lam, seed, r, energies, W, switches, gate = args
    ceiling = max(energies) + 0.5 * torus.field
    spec = decompose(torus, law, prof, lam, seed, r, ceiling)
    rows = []
    gated = torus.cells_per_side is not None and torus.cells_per_side >= 4
    for E in energies:
        P = fermi_projection(spec, E)
        h = theta_windowed(P, torus, switches, W)
        b = bott_index(P, torus)
        ok = decay_profile(P, torus).passes(gate) if gated and P.rank else None
        rows.append([h.sigma, h.sigma_truncation, h.theta.real, h.theta.imag,
                     b.value, b.residue, float(b.flagged), P.rank, ok])
    return rows


def cmd_hall(cfg, out=None):
    torus = torus_from(cfg["model"])
    torus.check_resolution()
    hc = cfg["hall"]
    B = torus.field
    law, prof, lam0 = disorder_model(cfg, B)
    lams = [x * B for x in hc["lambda_sweep_over_B"]] or [lam0]
    switches = SwitchPair(*hc["switches"]) if "switches" in hc else SwitchPair.centered(torus)
    W = hc.get("window_radius", default_window(torus))
    gate = DecayGate(**hc["gate"])
    energies = [e * B for e in hc["E_over_B"]]
    run = Run("hall", cfg, out)
    run.tolerances = {"window_radius": W, "switches": [switches.r, switches.s], "gate": gate.describe()}
    run.begin()
    seed, R = cfg["run"]["seed"], cfg["run"]["realizations"]
    rows, summary = [], []
    for lam in lams:
        R_eff = 1 if lam == 0 else R
        tasks = [(torus, law, prof, lam, seed, r, energies, W, switches, gate) for r in range(R_eff)]
        res = run_tasks(_hall_task, tasks, cfg["run"]["workers"])
        for k, E in enumerate(energies):
            per = [rr[k] for rr in res]
            sig = [p[0] for p in per]
            bott = [p[4] for p in per]
            gates = [p[8] for p in per]
            gated = [i for i, g in enumerate(gates) if g]
            diff = max((abs(sig[i] - bott[i]) for i in gated), default=None)
            row = [lam / B, E / B, fsum_mean(sig), stderr(sig), max(p[1] for p in per),
                   fsum_mean([p[2] for p in per]), fsum_mean([p[3] for p in per]),
                   fsum_mean(bott), max(p[5] for p in per), int(sum(p[6] for p in per)),
                   len(gated) / len(per) if gates[0] is not None else None, diff]
            rows.append(row)
            summary.append(dict(zip(_HALL_COLS, row)))
        run.lap(f"lambda={lam / B:g}B")
    run.emit_csv("hall.csv", _HALL_COLS, rows)
    run.emit_json("hall.json", {"rows": summary, "torus": torus.describe()})
    run.finish()
    return summary


_HALL_COLS = ["lambda_over_B", "E_over_B", "sigma", "sigma_stderr", "truncation", "theta_re", "theta_im",
              "bott", "bott_residue", "bott_flags", "gate_pass_fraction", "max_abs_sigma_minus_bott_gated"]


# wegner ---------------------------------------------------------------------


def _wegner_task(args):
    torus, law, prof, lam, seed, r, windows, ceiling = args
    E = decompose(torus, law, prof, lam, seed, r, ceiling, vectors=False).eigenvalues
    return [int(np.count_nonzero((E > lo) & (E <= hi))) for lo, hi in windows]


def cmd_wegner(cfg, out=None):
    wc = cfg["wegner"]
    tori = [torus_from(cfg["model"], s) for s in wc["scales"]]
    for t in tori:
        t.check_resolution()
    run = Run("wegner", cfg, out)
    B = tori[0].field
    law, prof, lam = disorder_model(cfg, B)
    windows = [(lo * B, hi * B) for lo, hi in wc["windows_over_B"]]
    ceiling = max(hi for _, hi in windows) + 0.05 * B
    run.tolerances = {"ceiling": ceiling}
    run.begin()
    seed, R = cfg["run"]["seed"], cfg["run"]["realizations"]
    rows = []
    for scale, torus in zip(wc["scales"], tori):
        tasks = [(torus, law, prof, lam, seed, r, windows, ceiling) for r in range(R)]
        counts = np.array(run_tasks(_wegner_task, tasks, cfg["run"]["workers"]))
        for k, (lo, hi) in enumerate(windows):
            st = wegner_from_counts(counts[:, k], hi - lo, torus.side_length)
            rows.append([scale, torus.side_length, lo / B, hi / B, st.mean_count, st.stderr,
                         st.normalized, st.normalized_stderr])
        run.lap(f"L={torus.side_length:g}")
    cols = ["scale", "L", "J_lo_over_B", "J_hi_over_B", "mean_count", "stderr", "normalized",
            "normalized_stderr"]
    run.emit_csv("wegner.csv", cols, rows)
    run.emit_json("wegner.json", {"rows": [dict(zip(cols, r)) for r in rows]})
    run.finish()
    return rows


# moments --------------------------------------------------------------------


def _moments_task(args):
    torus, law, prof, lam, seed, r, bumps, ps, times, quad = args
    ceiling = max(b.center + b.half_width for b in bumps) + 0.25 * torus.field
    spec = decompose(torus, law, prof, lam, seed, r, ceiling)
    exact = np.array([[moment_series(spec, X, p, times, torus) for p in ps] for X in bumps])
    if not quad:
        return exact, None
    q = np.array([[moment_series(spec, X, p, times, torus, "quadrature") for p in ps] for X in bumps])
    return exact, q


def cmd_moments(cfg, out=None):
    torus = torus_from(cfg["model"])
    torus.check_resolution()
    mc = cfg["moments"]
    B = torus.field
    law, prof, lam = disorder_model(cfg, B)
    w = mc["half_width_over_B"] * B
    bumps = [EnergyBump(c * B, w / k) for c in mc["centers_over_B"] for k in (1, 2, 4)]
    ps = mc["p"]
    times = mc["T0"] * 2.0 ** np.arange(mc["K"] + 1)
    run = Run("moments", cfg, out)
    run.tolerances = {"bump_cutoff": BUMP_CUTOFF, "ballistic_C_max": 1.2, "knee_fraction": 0.1}
    run.begin()
    seed = cfg["run"]["seed"]
    R = 1 if lam == 0 else cfg["run"]["realizations"]
    tasks = [(torus, law, prof, lam, seed, r, bumps, ps, times, mc["quadrature_check"]) for r in range(R)]
    res = run_tasks(_moments_task, tasks, cfg["run"]["workers"])
    run.lap("moments")
    exact = fsum_mean([e for e, _ in res])
    rows, summaries = [], []
    quad_dev = 0.0
    if mc["quadrature_check"]:
        quad = fsum_mean([q for _, q in res])
        scale = np.maximum(np.abs(exact), 1e-300)
        quad_dev = float(np.max(np.where(exact == 0, np.abs(quad), np.abs(quad - exact) / scale)))
    failures = []
    for i, X in enumerate(bumps):
        for j, p in enumerate(ps):
            s = make_series(times, exact[i, j], p, meta={"center_over_B": X.center / B,
                                                         "half_width_over_B": X.half_width / B})
            for T, v in zip(times, exact[i, j]):
                rows.append([X.center / B, X.half_width / B, p, T, v, "exact_kernel"])
            summaries.append(s.summary())
            if p > 0 and not s.ballistic_ok():
                failures.append((X.center / B, X.half_width / B, p, s.ballistic_C))
    triples = {}
    for s in summaries:
        key = f"E={s['center_over_B']:g}B,p={s['p']:g}"
        triples.setdefault(key, []).append(s["beta_hat"])
    run.emit_csv("moments.csv", ["center_over_B", "half_width_over_B", "p", "T", "value", "evaluator"], rows)
    summary = {"series": summaries, "beta_hat_triples": triples,
               "quadrature_max_rel_dev": quad_dev if mc["quadrature_check"] else None,
               "ballistic_failures": failures}
    run.emit_json("moments.json", summary)
    run.finish()
    if failures:
        raise GuardFailure(f"ballistic bound violated: {failures}")
    return summary


# mobility-edge proxy scans -----------------------------------------------------


def _scan_task(args):
    torus, law, prof, lam, seed, r, band, clean, gate, points = args
    ceiling = clean.gap_midpoint(band) + 0.1 * torus.field
    spec = decompose(torus, law, prof, lam, seed, r, ceiling)
    px = mobility_proxy(spec, torus, band, clean, gate, points)
    return px.to_dict(), px.distance_to(clean.means[band - 1]), px.width


def cmd_scan_mobility(cfg, out=None):
    sc = cfg["scan"]
    band = sc["band"]
    gate = DecayGate(**sc["gate"])
    points = []
    for v in sc["values"]:
        model = dict(cfg["model"])
        c = {**cfg, "model": model, "disorder": {**cfg["disorder"], "law": dict(cfg["disorder"]["law"])}}
        if sc["mode"] == "B":
            # hold the absolute coupling at its value for the model field
            lam_abs = cfg["disorder"]["lambda_over_B"] * cfg["model"]["B"]
            model["B"] = v
            if "L" in model:
                flux = v * model["L"] ** 2 / (2 * math.pi)
                if abs(flux - round(flux)) > 1e-9 * max(1.0, flux):
                    B_adj, _ = quantize_field(model["L"], v)
                    warnings.warn(f"B = {v:g} is not flux-quantized at L = {model['L']:g}; using {B_adj:g}")
                    model["B"] = B_adj
        else:
            c["disorder"]["law"].update(kind="rescaled", family_lambda=v)
        torus = torus_from(model)
        torus.check_resolution()
        if sc["mode"] == "B":
            c["disorder"]["lambda_over_B"] = lam_abs / torus.field
        points.append((v, c, torus))
    run = Run("scan-mobility", cfg, out)
    run.tolerances = {"gate": gate.describe(), "points": sc["points"]}
    run.begin()
    seed, R = cfg["run"]["seed"], cfg["run"]["realizations"]
    out_rows, table = [], []
    for v, c, torus in points:
        clean = clean_levels(torus, max(band + 1, 2))
        law, prof, lam = disorder_model(c, torus.field)
        R_eff = 1 if lam == 0 else R
        tasks = [(torus, law, prof, lam, seed, r, band, clean, gate, sc["points"]) for r in range(R_eff)]
        res = run_tasks(_scan_task, tasks, cfg["run"]["workers"])
        dist = [d for _, d, _ in res]
        width = [w for _, _, w in res]
        statuses = sorted({p["status"] for p, _, _ in res})
        finite_d = [d for d in dist if math.isfinite(d)]
        finite_w = [w for w in width if math.isfinite(w)]
        entry = {"value": v, "B": torus.field, "L": torus.side_length, "clean_level": clean.means[band - 1],
                 "status": statuses[0] if len(statuses) == 1 else "mixed",
                 "mean_distance": fsum_mean(finite_d) if finite_d else None,
                 "mean_width": fsum_mean(finite_w) if finite_w else None,
                 "proxies": [p for p, _, _ in res]}
        table.append(entry)
        out_rows.append([sc["mode"], v, torus.field, entry["status"], entry["mean_distance"],
                         entry["mean_width"]])
        run.lap(f"{sc['mode']}={v:g}")
    verdict = _monotone_verdict(sc["mode"], table)
    run.emit_csv("mobility.csv", ["mode", "value", "B", "status", "mean_distance", "mean_width"], out_rows)
    run.emit_json("mobility.json", {"band": band, "mode": sc["mode"], "points": table, "verdict": verdict})
    run.finish()
    return {"points": table, "verdict": verdict}


def _monotone_verdict(mode, table):
    """Non-increasing distance as B grows, or non-increasing width as lambda shrinks."""
    if any(e["status"] == "degenerate" for e in table):
        return "degenerate"
    if mode == "B":
        seq = [e["mean_distance"] for e in sorted(table, key=lambda e: e["B"])]
    else:
        seq = [e["mean_width"] for e in sorted(table, key=lambda e: -e["value"])]
    if any(s is None for s in seq):
        return "undetermined"
    return "monotone" if all(b <= a + 1e-12 for a, b in zip(seq, seq[1:])) else "not_monotone"


COMMANDS = {
    "spectrum": cmd_spectrum,
    "hall": cmd_hall,
    "wegner": cmd_wegner,
    "moments": cmd_moments,
    "scan-mobility": cmd_scan_mobility,
}

__all__ = ["COMMANDS", "GuardFailure", "NumericalError", "run_tasks", "disorder_model", "decompose"]
