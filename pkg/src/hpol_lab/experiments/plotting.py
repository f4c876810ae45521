"""PNG figures rendered from a report's tables (off with ``plots=false``)."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_counts(report, path):
    """log count against log horizon, one line per eps."""
    plt = _pyplot()
    header, rows = report.tables["counts"]
    eps_col, h_col, c_col = header.index("eps"), header.index("horizon"), header.index("count")
    fig, ax = plt.subplots(figsize=(5, 4))
    for eps in sorted({r[eps_col] for r in rows}, reverse=True):
        sel = [r for r in rows if r[eps_col] == eps]
        ax.loglog([r[h_col] for r in sel], [max(r[c_col], 1) for r in sel], "o-",
                  label=f"eps={eps:g}")
    slope = report.summary.get("hpol_proxy")
    ax.set_title(f"{report.experiment}: slope proxy {slope:.3f}" if slope is not None
                 else report.experiment)
    ax.set_xlabel("horizon T")
    ax.set_ylabel("separated count")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_witness(report, path):
    plt = _pyplot()
    _, rows = report.tables["counts"]
    m = np.array([r[0] for r in rows], float)
    count = np.array([r[1] for r in rows], float)
    horizon = np.array([r[3] for r in rows], float)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(horizon, count, "o-", label="union size")
    ax.loglog(horizon, m * m, "k--", label="m^2")
    slope = report.summary.get("slope")
    if slope is not None:
        ax.set_title(f"face witness: slope {slope:.3f}")
    ax.set_xlabel("horizon 4 m tau")
    ax.set_ylabel("points")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_level_curve(report, path):
    plt = _pyplot()
    _, rows = report.tables["level_curve"]
    c = np.array([[r["c1"], r["c2"]] for r in rows])
    on_face = np.array([r["face_minus1"] != r["face_plus1"] or r["face_minus2"] != r["face_plus2"]
                        for r in rows])
    fig, ax = plt.subplots(figsize=(5, 5))
    closed = np.vstack([c, c[:1]])
    ax.plot(closed[:, 0], closed[:, 1], "-", color="0.5", lw=1)
    ax.plot(c[~on_face, 0], c[~on_face, 1], ".", color="0.3", ms=3)
    ax.plot(c[on_face, 0], c[on_face, 1], "o", color="C3", ms=4, label="face samples")
    ax.set_aspect("equal")
    ax.set_xlabel("c1")
    ax.set_ylabel("c2")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render(report, out_dir):
    """Figures that make sense for ``report``; returns the paths written."""
    out = Path(out_dir)
    done = []
    if report.experiment in ("flat_baseline", "revolution"):
        plot_counts(report, out / "counts.png")
        done.append(out / "counts.png")
    elif report.experiment == "face_witness":
        plot_witness(report, out / "witness.png")
        plot_level_curve(report, out / "level_curve.png")
        done += [out / "witness.png", out / "level_curve.png"]
    return done
