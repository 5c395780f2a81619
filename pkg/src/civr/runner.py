"""End-to-end pipelines behind the CLI subcommands.

Every pipeline writes delimited data (CSV) plus a JSON manifest holding
all parameters and per-time statistics; matplotlib figures are rendered
next to the data unless disabled.  Wall-clock times go to a separate
timings.json so that the data artifacts are byte-reproducible:
identical configs give identical CSV/JSON bytes, independent of the
worker count.
"""

from __future__ import annotations

import json
import logging
import os
import time

import numpy as np

from . import figures
from .config import RunConfig
from .grids import AxisSpec, PhaseGridSpec
from .hamiltonian import build_scaled
from .oracles import (NumericalFailure, SplitOpConfig, lowest_energies,
                      split_operator_evolve_times)
from .phase_space import CoherentLabel
from .propagator import (CivrParams, assemble_smooth, assemble_sudden,
                         endpoint_acceptance)
from .reconstruction import WavefunctionGrid, coherent_state, fidelity, reconstruct
from .trajectory import (LaunchParams, ensemble_history, evolve_ensemble,
                         launch_grid)

log = logging.getLogger(__name__)


# -- deterministic writers ---------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path, header, columns) -> None:
    """Write columns (same length) with shortest round-trip float format."""
    n = len(columns[0])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(n):
            fh.write(",".join(_fmt(col[i]) for col in columns) + "\n")


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _tkey(T: float) -> str:
    return f"{T:g}"


# -- unit boundary ------------------------------------------------------------


class _Scaled:
    """Everything the numerical core needs, in dimensionless units."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.scaling = cfg.quartic.scaling
        self.h = build_scaled(cfg.quartic)
        q0s, p0s = self.scaling.scale(cfg.q0, cfg.p0)
        self.z0 = CoherentLabel(q0s, p0s)
        self.grid1 = self._scale_grid(cfg.grid1)
        self.zf_grid = self._scale_grid(cfg.zf_grid)
        b = self.scaling.b
        self.x_axis = AxisSpec(cfg.x_grid.lo / b, cfg.x_grid.hi / b, cfg.x_grid.n)
        self.oracle_cfg = SplitOpConfig(x_min=cfg.oracle.x_min / b,
                                        x_max=cfg.oracle.x_max / b,
                                        n_x=cfg.oracle.n_x,
                                        dt=cfg.oracle_dt)

    def _scale_grid(self, g: PhaseGridSpec) -> PhaseGridSpec:
        b, hbar = self.scaling.b, self.scaling.hbar
        return PhaseGridSpec(q=AxisSpec(g.q.lo / b, g.q.hi / b, g.q.n),
                             p=AxisSpec(g.p.lo * b / hbar, g.p.hi * b / hbar, g.p.n))

    def civr_params(self, a: float) -> CivrParams:
        return CivrParams(a=a, c=self.cfg.c, grid1=self.grid1,
                          mode=self.cfg.mode, epsilon=self.cfg.epsilon)

    def x_nodes(self):
        """(scaled nodes, physical nodes)."""
        xs = self.x_axis.nodes()
        return xs, xs * self.scaling.b

    def unscale_phase(self, q, p):
        return self.scaling.unscale(np.asarray(q), np.asarray(p))


def _assemble(snap, sc: _Scaled, a: float):
    civr = sc.civr_params(a)
    if sc.cfg.mode == "sudden":
        return assemble_sudden(snap, sc.z0, civr, sc.zf_grid)
    return assemble_smooth(snap, sc.z0, civr, sc.zf_grid)


def _wavefunction_rows(sc: _Scaled, psi: WavefunctionGrid):
    x_phys = psi.x * sc.scaling.b
    psi_phys = psi.psi / np.sqrt(sc.scaling.b)
    return (x_phys, psi_phys.real, psi_phys.imag, np.abs(psi_phys) ** 2)


def _propagator_rows(sc: _Scaled, K):
    qf, pf = K.grid.mesh()
    qf_p, pf_p = sc.unscale_phase(qf, pf)
    return (qf_p, pf_p, K.K.real, K.K.imag)


# -- pipelines ----------------------------------------------------------------


def run_propagate(cfg: RunConfig, outdir: str, with_oracle: bool = False) -> dict:
    """Propagate at every configured time and write all artifacts.

    With ``with_oracle`` a split-operator reference is evolved as well
    and per-time fidelities are reported (the ``compare`` subcommand).
    """
    os.makedirs(outdir, exist_ok=True)
    t_start = time.perf_counter()
    sc = _Scaled(cfg)
    manifest = {"command": "compare" if with_oracle else "propagate",
                "config": cfg.as_dict(),
                "central_energy_bare":
                    float(sc.h.bare_value(sc.z0.q, sc.z0.p) * sc.scaling.hbar),
                "central_energy_corrected":
                    float(sc.h.value(sc.z0.q, sc.z0.p).real * sc.scaling.hbar),
                "results": {}}
    timings = {}

    if not cfg.times:
        log.warning("empty time list; nothing to propagate")
        manifest["warning"] = "empty time list; nothing to propagate"
        write_json(os.path.join(outdir, "manifest.json"), manifest)
        _write_resolved_config(cfg, outdir)
        return manifest

    q1, p1, x0 = launch_grid(sc.z0, sc.grid1)
    t0 = time.perf_counter()
    snaps = evolve_ensemble(sc.h, x0, cfg.times, dt=cfg.dt, workers=cfg.workers)
    timings["trajectories_s"] = time.perf_counter() - t0

    oracle_psis = {}
    if with_oracle:
        t0 = time.perf_counter()
        x_or = sc.oracle_cfg.x_nodes()
        psi0 = coherent_state(x_or, sc.z0)
        oracle_snaps = split_operator_evolve_times(cfg.quartic, psi0,
                                                   sc.oracle_cfg, cfg.times)
        oracle_psis = dict(zip(map(_tkey, cfg.times), oracle_snaps))
        timings["oracle_s"] = time.perf_counter() - t0

    xs, _ = sc.x_nodes()
    empty_times = []
    for T, a, snap in zip(cfg.times, cfg.a_values, snaps):
        key = _tkey(T)
        t0 = time.perf_counter()
        K = _assemble(snap, sc, a)
        psi = reconstruct(K, xs)
        norm_pre = psi.norm
        if cfg.renormalize and norm_pre > 0.0:
            psi = psi.renormalize()
        accepted, re_phi = endpoint_acceptance(snap, sc.z0, cfg.c)

        kpath = os.path.join(outdir, f"propagator_T{key}.csv")
        write_csv(kpath, ("qf", "pf", "re_K", "im_K"), _propagator_rows(sc, K))
        wpath = os.path.join(outdir, f"wavefunction_T{key}.csv")
        write_csv(wpath, ("x", "re_psi", "im_psi", "abs2_psi"),
                  _wavefunction_rows(sc, psi))
        cpath = os.path.join(outdir, f"contributions_T{key}.csv")
        q1_p, p1_p = sc.unscale_phase(q1, p1)
        write_csv(cpath, ("q1", "p1", "accepted", "re_phi"),
                  (q1_p, p1_p, accepted.astype(int), re_phi))

        entry = dict(K.meta)
        entry.update({
            "a": a,
            "norm_before_renormalization": norm_pre,
            "renormalized": bool(cfg.renormalize),
            "accepted_fraction": K.meta["accepted"] / max(1, K.meta["n_trajectories"]),
            "files": {"propagator": os.path.basename(kpath),
                      "wavefunction": os.path.basename(wpath),
                      "contributions": os.path.basename(cpath)},
        })

        if key in oracle_psis:
            psi_on_oracle = reconstruct(K, sc.oracle_cfg.x_nodes())
            entry["fidelity_vs_oracle"] = fidelity(psi_on_oracle, oracle_psis[key])

        if cfg.figures:
            _render_figures(sc, outdir, key, T, psi, oracle_psis.get(key),
                            accepted)
            entry["files"]["wavefunction_figure"] = f"wavefunction_T{key}.png"
            entry["files"]["contributions_figure"] = f"contributions_T{key}.png"

        manifest["results"][key] = entry
        timings[f"assembly_T{key}_s"] = time.perf_counter() - t0
        if K.meta["empty"]:
            empty_times.append(key)
        log.info("T=%s: accepted %d / %d, norm %.4f", key, K.meta["accepted"],
                 K.meta["n_trajectories"], norm_pre)

    if cfg.dump_trajectories:
        t0 = time.perf_counter()
        _dump_trajectories(sc, outdir, q1, p1, x0, max(cfg.times), cfg)
        timings["dump_s"] = time.perf_counter() - t0

    if with_oracle:
        report = {key: {"fidelity": manifest["results"][key]["fidelity_vs_oracle"],
                        "norm_before_renormalization":
                            manifest["results"][key]["norm_before_renormalization"],
                        "accepted_fraction":
                            manifest["results"][key]["accepted_fraction"]}
                  for key in map(_tkey, cfg.times)}
        write_json(os.path.join(outdir, "compare_report.json"), report)
        manifest["compare_report"] = "compare_report.json"

    write_json(os.path.join(outdir, "manifest.json"), manifest)
    _write_resolved_config(cfg, outdir)
    timings["total_s"] = time.perf_counter() - t_start
    write_json(os.path.join(outdir, "timings.json"), timings)

    if empty_times:
        raise NumericalFailure(
            f"no contributing trajectories at T = {', '.join(empty_times)}")
    return manifest


def _render_figures(sc: _Scaled, outdir, key, T, psi, psi_exact, accepted):
    x_phys = psi.x * sc.scaling.b
    psi_phys = psi.psi / np.sqrt(sc.scaling.b)
    exact_phys = None
    potential = None
    energy = None
    if psi_exact is not None:
        exact_phys = psi_exact.psi / np.sqrt(sc.scaling.b)
        spec = sc.cfg.quartic
        potential = 0.5 * spec.Omega ** 2 * x_phys ** 2 + 0.25 * spec.lam * x_phys ** 4
        energy = sc.h.bare_value(sc.z0.q, sc.z0.p) * sc.scaling.hbar
    figures.wavefunction_figure(os.path.join(outdir, f"wavefunction_T{key}.png"),
                                x_phys, psi_phys, T, psi_exact=exact_phys,
                                potential=potential, energy=energy)
    figures.contribution_figure(os.path.join(outdir, f"contributions_T{key}.png"),
                                sc.cfg.grid1, accepted, T,
                                star=(sc.cfg.q0, sc.cfg.p0))


def _dump_trajectories(sc: _Scaled, outdir, q1, p1, x0, T, cfg: RunConfig):
    dump_dir = os.path.join(outdir, "trajectories")
    os.makedirs(dump_dir, exist_ok=True)
    times, cols, _ = ensemble_history(sc.h, x0, T, dt=cfg.dt, stride=cfg.dump_stride)
    names = ("Q1", "Q2", "P1", "P2", "re_S", "im_S", "re_Mvv", "im_Mvv", "xi")
    for i in range(x0.shape[0]):
        path = os.path.join(dump_dir, f"traj_{i:05d}.csv")
        write_csv(path, ("t",) + names,
                  (times,) + tuple(cols[name][:, i] for name in names))
    index = os.path.join(dump_dir, "index.csv")
    q1_p, p1_p = sc.unscale_phase(q1, p1)
    write_csv(index, ("index", "q1", "p1"),
              (np.arange(x0.shape[0]), q1_p, p1_p))


def run_compare(cfg: RunConfig, outdir: str) -> dict:
    """Propagate and report fidelities against the split-operator oracle."""
    return run_propagate(cfg, outdir, with_oracle=True)


def run_scan_width(cfg: RunConfig, outdir: str, T: float, a_lo: float,
                   a_hi: float, steps: int) -> dict:
    """Fidelity and norm as a function of the smoothing width at one time."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if a_lo <= 0.0 or a_hi < a_lo:
        raise ValueError("need 0 < a_lo <= a_hi")
    os.makedirs(outdir, exist_ok=True)
    t_start = time.perf_counter()
    sc = _Scaled(cfg)
    a_values = np.linspace(a_lo, a_hi, steps) if steps > 1 else np.array([a_lo])

    _, _, x0 = launch_grid(sc.z0, sc.grid1)
    snap = evolve_ensemble(sc.h, x0, [T], dt=cfg.dt, workers=cfg.workers)[-1]
    x_or = sc.oracle_cfg.x_nodes()
    psi_exact = split_operator_evolve_times(cfg.quartic, coherent_state(x_or, sc.z0),
                                            sc.oracle_cfg, [T])[-1]

    fids = np.empty(steps)
    norms = np.empty(steps)
    for i, a in enumerate(a_values):
        K = _assemble(snap, sc, float(a))
        psi = reconstruct(K, x_or)
        norms[i] = psi.norm
        fids[i] = fidelity(psi, psi_exact) if norms[i] > 0 else 0.0

    best = int(np.argmax(fids))
    write_csv(os.path.join(outdir, "scan_width.csv"),
              ("a", "fidelity", "norm"), (a_values, fids, norms))
    result = {"command": "scan-width", "config": cfg.as_dict(), "T": T,
              "a_values": [float(a) for a in a_values],
              "fidelity": [float(f) for f in fids],
              "norm": [float(n) for n in norms],
              "best_a": float(a_values[best]),
              "best_fidelity": float(fids[best])}
    write_json(os.path.join(outdir, "scan_width.json"), result)
    if cfg.figures:
        figures.scan_figure(os.path.join(outdir, "scan_width.png"),
                            a_values, fids, norms)
    _write_resolved_config(cfg, outdir)
    write_json(os.path.join(outdir, "timings.json"),
               {"total_s": time.perf_counter() - t_start})
    return result


def run_trajectories(cfg: RunConfig, outdir: str, points, stride: int | None = None) -> dict:
    """Dump time series for explicit companion points (default: central)."""
    os.makedirs(outdir, exist_ok=True)
    sc = _Scaled(cfg)
    stride = stride or cfg.dump_stride
    if not points:
        points = [(cfg.q0, cfg.p0)]
    T = max(cfg.times) if cfg.times else 0.0
    written = []
    failed = []
    for q1_p, p1_p in points:
        q1s, p1s = sc.scaling.scale(q1_p, p1_p)
        x0 = np.array([[sc.z0.q + 0.5 * (q1s - sc.z0.q), 0.5 * (q1s - sc.z0.q),
                        sc.z0.p + 0.5 * (p1s - sc.z0.p), -0.5 * (p1s - sc.z0.p)]])
        times, cols, valid = ensemble_history(sc.h, x0, T, dt=cfg.dt, stride=stride)
        name = f"trajectory_q1_{q1_p:g}_p1_{p1_p:g}.csv"
        names = ("Q1", "Q2", "P1", "P2", "re_S", "im_S", "re_Mvv", "im_Mvv", "xi")
        write_csv(os.path.join(outdir, name), ("t",) + names,
                  (times,) + tuple(cols[n][:, 0] for n in names))
        written.append(name)
        if not valid[0]:
            failed.append(name)
    result = {"command": "trajectories", "T": T, "files": written}
    write_json(os.path.join(outdir, "trajectories.json"), result)
    _write_resolved_config(cfg, outdir)
    if failed:
        raise NumericalFailure(f"trajectory left the valid range: {failed}")
    return result


def run_eigen(cfg: RunConfig, outdir: str, n_states: int = 3) -> dict:
    """Lowest oscillator levels from imaginary-time relaxation."""
    os.makedirs(outdir, exist_ok=True)
    sc = _Scaled(cfg)
    energies = lowest_energies(cfg.quartic, sc.oracle_cfg, n_states=n_states)
    result = {"command": "eigen",
              "energies": [float(e) for e in energies],
              "config": cfg.as_dict()}
    write_json(os.path.join(outdir, "eigen.json"), result)
    _write_resolved_config(cfg, outdir)
    return result


def _write_resolved_config(cfg: RunConfig, outdir: str) -> None:
    if cfg.source_text:
        with open(os.path.join(outdir, "resolved_config.ini"), "w",
                  encoding="utf-8", newline="\n") as fh:
            fh.write(cfg.source_text)
