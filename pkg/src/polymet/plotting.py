"""Matplotlib figures rendered next to a written report."""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _margin_figure(data, path):
    rows = [c for c in data["checks"] if c["comparison"] == "<=" and isinstance(c["value"], float)]
    if not rows:
        return None
    labels = [f"{c['suite']}.{c['name']}" for c in rows]
    floor = 1e-300
    margins = [np.log10(max(c["value"], floor) / c["tolerance"]) if c["value"] > 0 else -17.0 for c in rows]
    colors = ["tab:green" if c["pass"] else "tab:red" for c in rows]
    fig, ax = plt.subplots(figsize=(7, 0.28 * len(rows) + 1.2))
    ax.barh(range(len(rows)), margins, color=colors)
    ax.axvline(0.0, color="k", lw=0.8)
    ax.set_yticks(range(len(rows)), labels, fontsize=7)
    ax.invert_yaxis()
    ax.set_xlabel("log10(value / tolerance)")
    ax.set_title("check margins (left of 0 passes)")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def _warped(t, ax):
    for label, row in t.items():
        ax.semilogy(row["T"], row["C"], "o-", label=f"{label} ({row['flag']})")
    ax.set_xlabel("truncation length T")
    ax.set_ylabel("fitted C(T)")
    ax.legend(fontsize=7)


def _cutoff(t, ax):
    ax.step(t["cutoff"], t["rank"], where="post")
    ax.plot(t["cutoff"], t["rank"], "o")
    ax.set_xlabel("cutoff")
    ax.set_ylabel("rank below cutoff")


def _delta(t, ax):
    d = np.asarray(t["delta"])
    ax.plot(d**2, t["integral"], "o-")
    ax.axhline(2.0, color="k", lw=0.8, ls="--")
    ax.set_xlabel("delta^2")
    ax.set_ylabel("Euler integral")


def _trajectory(t, ax):
    ax.plot(t["x"], t["y"], lw=1.0)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_aspect("equal", adjustable="datalim")


def _sphere(t, ax):
    ax.semilogy(t["theta"], np.abs(t["scalar_minus_2"]) + 1e-18)
    ax.set_xlabel("theta")
    ax.set_ylabel("|Scal - 2|")


def _pairings(t, ax):
    lie = np.asarray(t["lie_pairing"])
    div = np.asarray(t["div_pairing"])
    bian = np.asarray(t["bianchi_pairing"])
    ax.plot(lie, -2 * div, "o", label="-2 <X, div h>")
    ax.plot(lie, bian, "x", label="<X, B(h)>")
    lim = max(np.abs(lie).max(), 1e-12)
    ax.plot([-lim, lim], [-lim, lim], "k--", lw=0.8)
    ax.set_xlabel("<L_X g, h>")
    ax.legend(fontsize=7)


FIGURES = {
    ("scales", "warped_trend"): _warped,
    ("index", "circle_cutoff"): _cutoff,
    ("chern", "gauss_bonnet_delta"): _delta,
    ("geodesic", "bumpy_trajectory"): _trajectory,
    ("curvature", "sphere_scalar"): _sphere,
    ("gauge", "adjoint_pairings"): _pairings,
}


def render_report(data, stem):
    """Write ``<stem>_checks.png`` and one PNG per known table; return the paths."""
    out = []
    directory = os.path.dirname(stem)
    if directory:
        os.makedirs(directory, exist_ok=True)
    p = _margin_figure(data, f"{stem}_checks.png")
    if p:
        out.append(p)
    for (suite, name), draw in FIGURES.items():
        table = data.get("tables", {}).get(suite, {}).get(name)
        if table is None:
            continue
        fig, ax = plt.subplots(figsize=(5, 3.6))
        draw(table, ax)
        ax.set_title(f"{suite}: {name}", fontsize=9)
        fig.tight_layout()
        path = f"{stem}_{suite}_{name}.png"
        fig.savefig(path, dpi=110)
        plt.close(fig)
        out.append(path)
    return out
