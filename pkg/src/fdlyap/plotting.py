"""Figure rendering for run and sweep reports (PNG, non-interactive backend)."""
from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 150,
}

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def figsize(width=6.0):
    return (width, width * GOLDEN)


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_lyapunov(log, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize())
        ax.plot(log.t, log.V_exact, lw=1.0, label="V (true)")
        if not np.array_equal(log.V_measured, log.V_exact):
            ax.plot(log.t, log.V_measured, lw=0.6, alpha=0.6, label="V (measured)")
        ax.set_xlabel("t")
        ax.set_ylabel("V(t_n)")
        ax.legend(loc="upper right")
        return _save(fig, path)


def plot_controls(log, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize())
        for k in range(log.n_channels):
            # held values: step plot on [t_n, t_{n+1})
            ax.step(log.t, log.u[:, k], where="post", lw=0.8, label=f"u_{k + 1}")
        ax.set_xlabel("t")
        ax.set_ylabel("control input")
        ax.legend(loc="upper right")
        return _save(fig, path)


def plot_bloch_components(log, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize())
        for i, name in enumerate("xyz"):
            ax.plot(log.t, log.bloch[:, i], lw=0.9, label=name)
        ax.set_ylim(-1.05, 1.05)
        ax.set_xlabel("t")
        ax.set_ylabel("Bloch component")
        ax.legend(loc="lower right")
        return _save(fig, path)


def plot_bloch_sphere(log, path, marker=None):
    with plt.rc_context(STYLE):
        fig = plt.figure(figsize=(5, 5))
        ax = fig.add_subplot(projection="3d")
        u, v = np.mgrid[0 : 2 * np.pi : 40j, 0 : np.pi : 20j]
        ax.plot_wireframe(np.cos(u) * np.sin(v), np.sin(u) * np.sin(v), np.cos(v), color="0.85", lw=0.4)
        b = log.bloch
        ax.plot(b[:, 0], b[:, 1], b[:, 2], lw=0.8)
        ax.scatter(*b[0], color="tab:red", s=15, label="start")
        ax.scatter(*b[-1], color="tab:green", s=15, label="end")
        if marker is not None:
            ax.scatter(*marker, color="k", marker="x", s=25, label="reference")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        ax.set_zlabel("z")
        ax.set_box_aspect((1, 1, 1))
        ax.legend(loc="upper left")
        return _save(fig, path)


def plot_sweep(x, y, path, xlabel, ylabel="trailing max V"):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize(5.0))
        ax.plot(x, y, "o-")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        return _save(fig, path)


def render_run(log, out_dir, marker=None) -> list[str]:
    """Write the standard figure set for one run; returns file names."""
    paths = [
        plot_lyapunov(log, os.path.join(out_dir, "lyapunov.png")),
        plot_controls(log, os.path.join(out_dir, "controls.png")),
    ]
    if log.bloch is not None:
        paths.append(plot_bloch_components(log, os.path.join(out_dir, "bloch_components.png")))
        paths.append(plot_bloch_sphere(log, os.path.join(out_dir, "bloch_sphere.png"), marker=marker))
    return [os.path.basename(p) for p in paths]
