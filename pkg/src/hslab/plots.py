"""PNG figures for the command-line reports (Agg backend, no display needed)."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams.update({
        "figure.figsize": (5.5, 3.6),
        "axes.grid": True,
        "grid.alpha": 0.3,
        "font.size": 9,
        "savefig.dpi": 120,
    })
    return plt


def _save(fig, path: Path):
    # fixed metadata keeps reruns byte-stable where the backend allows it
    fig.savefig(path, bbox_inches="tight", metadata={"Software": None})
    fig.clf()


def profile_figure(path, r, u, title=""):
    plt = _pyplot()
    fig, ax = plt.subplots()
    mask = r > 0
    ax.loglog(r[mask], np.maximum(u[mask], 1e-300), lw=1.2)
    ax.set_xlabel("r")
    ax.set_ylabel("u(r)")
    ax.set_title(title)
    _save(fig, Path(path))
    plt.close(fig)


def sweep_figure(path, alphas, lams, mus, k_inv):
    plt = _pyplot()
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(8.0, 3.4))
    a1.semilogx(alphas, np.asarray(lams) / k_inv, "o-")
    a1.axhline(1.0, color="k", lw=0.8, ls="--")
    a1.set_xlabel("alpha")
    a1.set_ylabel("lambda * K")
    a2.loglog(alphas, mus, "s-")
    a2.set_xlabel("alpha")
    a2.set_ylabel("mu")
    fig.tight_layout()
    _save(fig, Path(path))
    plt.close(fig)


def rescaled_figure(path, curves, bubble_x, bubble_u):
    """``curves``: list of (label, X, u_hat)."""
    plt = _pyplot()
    fig, ax = plt.subplots()
    for label, x, y in curves:
        ax.plot(x, y, lw=1.0, label=label)
    ax.plot(bubble_x, bubble_u, "k--", lw=1.2, label="bubble")
    ax.set_xlabel("X = r / mu")
    ax.set_ylabel("rescaled u")
    ax.legend(fontsize=7)
    _save(fig, Path(path))
    plt.close(fig)


def expansion_figure(path, fits):
    """``fits``: list of (label, theta, I - K^-1, coefficient)."""
    plt = _pyplot()
    fig, ax = plt.subplots()
    for label, th, y, c in fits:
        line, = ax.plot(th, y, "o", label=label)
        ax.plot(th, c * np.asarray(th), "-", color=line.get_color(), lw=0.8)
    ax.axhline(0.0, color="k", lw=0.6)
    ax.set_xlabel("theta_eps")
    ax.set_ylabel("I(u_eps) - 1/K")
    ax.legend(fontsize=7)
    _save(fig, Path(path))
    plt.close(fig)


def b0_figure(path, history, k_inv, bound):
    plt = _pyplot()
    fig, ax = plt.subplots()
    B = np.array([h[0] for h in history])
    lam = np.array([h[1] for h in history]) / k_inv
    ok = np.array([h[2] for h in history])
    ax.plot(B[ok], lam[ok], "o", label="pass")
    ax.plot(B[~ok], lam[~ok], "x", label="fail")
    ax.axvline(bound, color="k", ls="--", lw=0.8, label="curvature bound")
    ax.set_xlabel("B")
    ax.set_ylabel("lambda * K")
    ax.legend(fontsize=7)
    _save(fig, Path(path))
    plt.close(fig)
