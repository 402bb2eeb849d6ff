"""Optional PNG figures for CLI reports.

matplotlib is imported on first use so the numerical core never depends
on it.  Every function writes one file and returns its path.
"""

from pathlib import Path

import numpy as np


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:
        raise RuntimeError("figures need matplotlib: pip install 'artifact[plot]'") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams.update({"figure.dpi": 120, "axes.grid": True, "grid.alpha": 0.3,
                         "font.size": 9})
    return plt


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    fig.clf()
    return path


def plot_profiles(profiles, path):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.2))
    for prof in profiles:
        r, U, _ = prof.uniform_export(401)
        ax.plot(r, U, label=f"m = {prof.m}")
    ax.axhline(0.0, color="k", lw=0.5)
    ax.set_xlabel("r")
    ax.set_ylabel("U_m(r)")
    ax.legend()
    out = _save(fig, path)
    plt.close(fig)
    return out


def plot_eigenfunctions(data, path):
    """``data`` is a list of BifurcationDatum with their V_m."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.2))
    r = np.linspace(0.0, 1.0, 401)
    for d in data:
        ax.plot(r, d.V_m.evaluate(r), label=f"m = {d.m}")
    ax.set_xlabel("r")
    ax.set_ylabel("V_m(r)")
    ax.legend()
    out = _save(fig, path)
    plt.close(fig)
    return out


def plot_boundary(curves, path):
    """Boundary radius against x for several (label, BoundaryCurve) pairs."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.2))
    for label, c in curves:
        x = np.append(c.x, 2 * np.pi)
        ax.plot(x, np.append(c.radius, c.radius[0]), label=label)
    ax.set_xlabel("x")
    ax.set_ylabel("boundary radius")
    ax.legend()
    out = _save(fig, path)
    plt.close(fig)
    return out


def plot_scaling(report, path, label="residual"):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    s = np.asarray(report.s_values)
    res = np.asarray(report.residuals)
    ax.loglog(s, res, "o-", label=f"{label} (slope {report.slope:.3f})")
    ax.loglog(s, res[0] * (s / s[0]) ** 2, "k--", lw=0.8, label="s^2")
    ax.set_xlabel("s")
    ax.set_ylabel("sup |residual|")
    ax.legend()
    out = _save(fig, path)
    plt.close(fig)
    return out


def plot_kernel(kernel, path):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    n = np.asarray(kernel["resolutions"], dtype=float)
    res = np.asarray(kernel["residuals"])
    ax.loglog(n, res, "o-", label="kernel residual")
    ax.loglog(n, res[0] * (n / n[0]) ** -2, "k--", lw=0.8, label="n^-2")
    ax.set_xlabel("radial intervals n")
    ax.set_ylabel("relative residual")
    ax.legend()
    out = _save(fig, path)
    plt.close(fig)
    return out
