"""Figure rendering for the CLI report path.

Every delimited artifact the CLI writes gets a matplotlib companion
rendered to PNG next to it.  Rendering goes through the object-oriented
Agg canvas, not pyplot, so concurrent sweep jobs can draw without
sharing global state.  Figures are plot aids, not part of the
deterministic-output contract (that contract covers the CSV bodies).
"""

from __future__ import annotations

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

__all__ = [
    "render_spectrum",
    "render_state",
    "render_timeseries",
    "render_sweep",
]


def _new_figure(figsize, nrows=1, ncols=1, sharex=False):
    fig = Figure(figsize=figsize)
    FigureCanvasAgg(fig)
    axes = fig.subplots(nrows, ncols, sharex=sharex)
    return fig, axes


def _finish(fig: Figure, path: str) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120, format="png")


def render_spectrum(path: str, energies: np.ndarray) -> None:
    energies = np.asarray(energies)
    fig, (ax_re, ax_im) = _new_figure((8, 3.2), 1, 2)
    idx = np.arange(len(energies))
    ax_re.plot(idx, energies.real, "o-", ms=4)
    ax_re.set_xlabel("level")
    ax_re.set_ylabel("Re E")
    ax_re.grid(True, alpha=0.3)
    ax_im.plot(idx, energies.imag, "s", color="firebrick", ms=4)
    ax_im.set_xlabel("level")
    ax_im.set_ylabel("Im E")
    ax_im.grid(True, alpha=0.3)
    _finish(fig, path)


def render_state(
    path: str,
    x: np.ndarray,
    psi: np.ndarray,
    rho: np.ndarray,
    x_half: np.ndarray,
    current: np.ndarray,
    label: str,
) -> None:
    fig, (ax_psi, ax_rho) = _new_figure((7, 5.4), 2, 1, sharex=True)
    ax_psi.plot(x, psi.real, label="Re")
    ax_psi.plot(x, psi.imag, label="Im", alpha=0.8)
    ax_psi.set_ylabel(label)
    ax_psi.legend(loc="upper right", fontsize=8)
    ax_psi.grid(True, alpha=0.3)
    ax_rho.plot(x, rho.real, color="black", label="Re rho")
    if np.any(rho.imag):
        ax_rho.plot(x, rho.imag, color="gray", ls="--", label="Im rho")
    ax_rho.plot(x_half, current.real, color="seagreen", label="Re J", alpha=0.8)
    if np.any(current.imag):
        ax_rho.plot(x_half, current.imag, color="olive", ls=":", label="Im J")
    ax_rho.set_xlabel("x")
    ax_rho.legend(loc="upper right", fontsize=8)
    ax_rho.grid(True, alpha=0.3)
    _finish(fig, path)


def render_timeseries(path: str, rows: list[dict]) -> None:
    t = np.array([r["t"] for r in rows])
    total = np.array([r["total_prob"] for r in rows])
    energy = np.array([r["energy"] for r in rows])
    cmax = np.array([r["continuity_max"] for r in rows])
    fig, axes = _new_figure((7, 7), 3, 1, sharex=True)
    axes[0].plot(t, total.real, label="Re")
    if np.any(total.imag):
        axes[0].plot(t, total.imag, ls="--", label="Im")
    axes[0].set_ylabel("total probability")
    axes[0].legend(fontsize=8)
    axes[1].plot(t, energy.real, color="firebrick", label="Re")
    if np.any(energy.imag):
        axes[1].plot(t, energy.imag, color="salmon", ls="--", label="Im")
    axes[1].set_ylabel("energy")
    axes[1].legend(fontsize=8)
    ok = np.isfinite(cmax) & (cmax > 0)
    if np.any(ok):
        axes[2].semilogy(t[ok], cmax[ok], color="seagreen")
    axes[2].set_ylabel("continuity residual")
    axes[2].set_xlabel("t")
    for ax in axes:
        ax.grid(True, alpha=0.3)
    _finish(fig, path)


def render_sweep(path: str, values: list[float], table: list[dict]) -> None:
    fig, (ax_e, ax_im) = _new_figure((7, 5.4), 2, 1, sharex=True)
    ok = [row for row in table if row["status"] == "ok"]
    if ok:
        vs = [row["value"] for row in ok]
        n_levels = len(ok[0]["energies"])
        for lvl in range(n_levels):
            ax_e.plot(vs, [row["energies"][lvl].real for row in ok],
                      "o-", ms=4, label=f"E{lvl}")
        ax_e.legend(fontsize=8)
        ax_im.semilogy(
            vs,
            [max(row["max_abs_im"], 1e-18) for row in ok],
            "s-", color="firebrick", ms=4,
        )
    ax_e.set_ylabel("Re E")
    ax_e.grid(True, alpha=0.3)
    ax_im.set_ylabel("max |Im E|")
    ax_im.set_xlabel("parameter value")
    ax_im.grid(True, alpha=0.3)
    _finish(fig, path)
