"""Matplotlib renderings of the report data (written next to the CSVs)."""

from __future__ import annotations

import numpy as np

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def wavefunction_figure(path, x, psi, T, psi_exact=None, potential=None,
                        energy=None):
    """|psi| of the semiclassical result, optionally against the oracle."""
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    if psi_exact is not None:
        ax.plot(x, np.abs(psi_exact), color="tab:red", lw=1.0, label="exact")
    ax.plot(x, np.abs(psi), color="black", lw=1.8, label="CIVR")
    if potential is not None:
        ax.plot(x, potential / 10.0, color="tab:blue", lw=0.8, ls=":",
                label="V(x)/10")
    if energy is not None:
        ax.axhline(energy / 10.0, color="tab:blue", lw=0.8, ls="--",
                   label="E/10")
    ax.set_xlabel("x")
    ax.set_ylabel(r"$|\psi(x)|$")
    ax.set_title(f"T = {T:g}")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def contribution_figure(path, grid1, mask, T, star=None):
    """Contributing (white) / non-contributing (dark) companion points."""
    fig, ax = plt.subplots(figsize=(4.2, 4.6))
    img = mask.reshape(grid1.q.n, grid1.p.n).T.astype(float)
    ax.imshow(img, origin="lower", cmap="gray", vmin=0.0, vmax=1.0,
              extent=(grid1.q.lo, grid1.q.hi, grid1.p.lo, grid1.p.hi),
              aspect="auto", interpolation="nearest")
    if star is not None:
        ax.plot([star[0]], [star[1]], marker="*", color="tab:red", ms=12)
    ax.set_xlabel(r"$q_1$")
    ax.set_ylabel(r"$p_1$")
    ax.set_title(f"contributing trajectories, T = {T:g}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def scan_figure(path, a_values, fidelities, norms):
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    ax.plot(a_values, fidelities, "o-", color="black", label="fidelity")
    ax.set_xlabel("smoothing width a")
    ax.set_ylabel("fidelity")
    ax2 = ax.twinx()
    ax2.plot(a_values, norms, "s--", color="tab:blue", label="norm")
    ax2.set_ylabel("norm before renormalization", color="tab:blue")
    best = int(np.argmax(fidelities))
    ax.axvline(a_values[best], color="tab:red", lw=0.8, ls=":")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
