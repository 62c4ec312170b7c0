"""The seven standard figures over wormsim CSV outputs.

Each figure has a pure extraction step (CSV rows -> plot-ready series) and
a drawing step; tests assert on the extracted series, rendering is a thin
matplotlib layer.  No smoothing or recomputation happens here beyond the
kappa rescaling (measured mean degree) and peak lookup that fig3 and fig7
require.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .loader import ALL_SERIES, RG, RGG, RGG_MAC, DataError, Dataset, load_dataset, mean_degree_by_graph

FIGURE_IDS = ("fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7")

_NEEDS = {
    "fig1": ("prevalence.csv",),
    "fig2": ("prevalence.csv",),
    "fig3": ("prevalence.csv", "metrics.csv"),
    "fig4": ("prevalence.csv",),
    "fig5": ("timeseries.csv",),
    "fig6": ("timeseries.csv",),
    "fig7": ("timeseries.csv",),
}

_STYLE = {
    RG: dict(color="#1f77b4", marker="o"),
    RGG: dict(color="#d62728", marker="s"),
    RGG_MAC: dict(color="#2ca02c", marker="^"),
}


@dataclass(frozen=True)
class FigureSpec:
    """What to render: figure id, input directory, output image, options."""

    figure_id: str
    input_dir: Path
    output: Path
    log_y: bool = False
    lambda_select: float | None = None
    node_select: int | None = None
    series_filter: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.figure_id not in FIGURE_IDS:
            raise DataError(f"unknown figure id {self.figure_id!r}; pick one of {FIGURE_IDS}")


def render(spec: FigureSpec) -> Path:
    """Render one figure to the spec's output path; returns the path."""
    ds = load_dataset(spec.input_dir, _NEEDS[spec.figure_id])
    extract = globals()[f"extract_{spec.figure_id}"]
    series = extract(ds, spec)
    fig, ax = plt.subplots(figsize=(5.2, 3.9), dpi=150)
    _DRAWERS[spec.figure_id](ax, series, spec)
    if spec.log_y:
        ax.set_yscale("log")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, metadata={"Software": "wormsim-figs"})
    plt.close(fig)
    return out


def _want_series(spec: FigureSpec, default: tuple[str, ...]) -> tuple[str, ...]:
    return spec.series_filter if spec.series_filter else default


def _require(found: dict, wanted, what: str):
    missing = [s for s in wanted if s not in found]
    if missing:
        raise DataError(f"{what}: required series missing from input data: {missing}")


def _largest_n(rows: list[dict], spec: FigureSpec, wanted: tuple[str, ...]) -> int:
    if spec.node_select is not None:
        if not any(r["N"] == spec.node_select for r in rows):
            raise DataError(f"no rows with N={spec.node_select}")
        return spec.node_select
    # largest density carrying every requested series
    candidates = [
        n
        for n in {r["N"] for r in rows}
        if all(any(r["N"] == n and r["series"] == s for r in rows) for s in wanted)
    ]
    if not candidates:
        present = sorted({r["series"] for r in rows})
        raise DataError(
            f"required series missing from input data: no density has all of "
            f"{list(wanted)} (found {present})"
        )
    return max(candidates)


def _mean_by(rows, key_fields, value_field):
    acc: dict[tuple, list[float]] = {}
    for r in rows:
        acc.setdefault(tuple(r[k] for k in key_fields), []).append(r[value_field])
    return {k: float(np.mean(v)) for k, v in acc.items()}


def extract_fig1(ds: Dataset, spec: FigureSpec) -> dict:
    """Prevalence vs infection rate for RG / RGG / RGG+MAC at one density."""
    rows = ds.rows("prevalence.csv")
    wanted = _want_series(spec, ALL_SERIES)
    rows = [r for r in rows if r["series"] in wanted]
    if not rows:
        raise DataError(f"fig1: required series missing from input data: {list(wanted)}")
    n = _largest_n(rows, spec, wanted)
    rows = [r for r in rows if r["N"] == n]
    means = _mean_by(rows, ("series", "lambda"), "prevalence_mean")
    out: dict = {"node_count": n, "series": {}}
    for s in wanted:
        lams = sorted(lam for (ss, lam) in means if ss == s)
        if lams:
            out["series"][s] = (np.array(lams), np.array([means[(s, l)] for l in lams]))
    _require(out["series"], wanted, "fig1")
    return out


def _draw_fig1(ax, data, spec):
    for s, (lams, prev) in data["series"].items():
        ax.plot(lams, prev, label=s, ms=4, **_STYLE[s])
    ax.set_xlabel("infection rate")
    ax.set_ylabel("final outbreak fraction")


def extract_fig2(ds: Dataset, spec: FigureSpec) -> dict:
    """Prevalence vs infection rate for RGG (MAC off) across densities."""
    wanted = _want_series(spec, (RGG,))
    rows = [r for r in ds.rows("prevalence.csv") if r["series"] in wanted]
    if not rows:
        raise DataError(f"fig2: required series missing from input data: {list(wanted)}")
    means = _mean_by(rows, ("N", "lambda"), "prevalence_mean")
    out = {"series": {}}
    for n in sorted({r["N"] for r in rows}):
        lams = sorted(lam for (nn, lam) in means if nn == n)
        out["series"][n] = (np.array(lams), np.array([means[(n, l)] for l in lams]))
    return out


def _draw_fig2(ax, data, spec):
    for n, (lams, prev) in data["series"].items():
        ax.plot(lams, prev, marker="o", ms=3, label=f"N={n}")
    ax.set_xlabel("infection rate")
    ax.set_ylabel("final outbreak fraction")


def extract_fig3(ds: Dataset, spec: FigureSpec) -> dict:
    """Prevalence vs kappa = lambda * mean degree, overlaid across densities."""
    wanted = _want_series(spec, (RGG, RGG_MAC))
    rows = [r for r in ds.rows("prevalence.csv") if r["series"] in wanted]
    if not rows:
        raise DataError(f"fig3: required series missing from input data: {list(wanted)}")
    degree = mean_degree_by_graph(ds.rows("metrics.csv"))
    means = _mean_by(rows, ("series", "name", "N", "lambda"), "prevalence_mean")
    out = {"series": {}}
    for s, name, n in sorted({(r["series"], r["name"], r["N"]) for r in rows}):
        if (name, n) not in degree:
            raise DataError(f"fig3: metrics.csv lacks mean_degree for {name!r} N={n}")
        k = degree[(name, n)]
        lams = sorted(lam for (ss, nm, nn, lam) in means if (ss, nm, nn) == (s, name, n))
        kappa = np.array(lams) * k
        prev = np.array([means[(s, name, n, l)] for l in lams])
        out["series"][(s, n)] = (kappa, prev)
    if len(out["series"]) == 1:
        print("wormsim-figs: warning: fig3 collapse with a single curve", file=sys.stderr)
    return out


def _draw_fig3(ax, data, spec):
    for (s, n), (kappa, prev) in data["series"].items():
        style = dict(_STYLE[s])
        style.pop("color")
        ax.plot(kappa, prev, ms=3, label=f"{s} N={n}", **style)
    ax.set_xlabel("rescaled infection rate  $\\lambda \\langle k \\rangle$")
    ax.set_ylabel("final outbreak fraction")


def extract_fig4(ds: Dataset, spec: FigureSpec) -> dict:
    """Prevalence vs node count at fixed infection rate, MAC off vs on."""
    wanted = _want_series(spec, (RGG, RGG_MAC))
    rows = [r for r in ds.rows("prevalence.csv") if r["series"] in wanted]
    found = {r["series"] for r in rows}
    _require({s: True for s in found}, wanted, "fig4")
    lam = spec.lambda_select
    if lam is None:
        common = None
        for s in wanted:
            lams = {r["lambda"] for r in rows if r["series"] == s}
            common = lams if common is None else (common & lams)
        if not common:
            raise DataError("fig4: no infection rate is shared by all requested series")
        lam = max(common)
    rows = [r for r in rows if abs(r["lambda"] - lam) < 1e-12]
    if not rows:
        raise DataError(f"fig4: no rows at infection rate {lam}")
    means = _mean_by(rows, ("series", "N"), "prevalence_mean")
    out = {"lambda": lam, "series": {}}
    for s in wanted:
        ns = sorted(n for (ss, n) in means if ss == s)
        out["series"][s] = (np.array(ns), np.array([means[(s, n)] for n in ns]))
    return out


def _draw_fig4(ax, data, spec):
    for s, (ns, prev) in data["series"].items():
        ax.plot(ns, prev, ms=4, label=s, **_STYLE[s])
    ax.set_xlabel("number of devices")
    ax.set_ylabel(f"final outbreak fraction at infection rate {data['lambda']:g}")


def _timeseries_series(ds: Dataset, spec: FigureSpec, column: str, what: str) -> dict:
    wanted = _want_series(spec, ALL_SERIES)
    rows = [r for r in ds.rows("timeseries.csv") if r["series"] in wanted]
    if not rows:
        raise DataError(f"{what}: required series missing from input data: {list(wanted)}")
    n = _largest_n(rows, spec, wanted)
    rows = [r for r in rows if r["N"] == n]
    lam = spec.lambda_select
    if lam is None:
        common = None
        for s in wanted:
            lams = {r["lambda"] for r in rows if r["series"] == s}
            if lams:
                common = lams if common is None else (common & lams)
        if not common:
            raise DataError(f"{what}: no infection rate shared by the requested series at N={n}")
        lam = max(common)
    rows = [r for r in rows if abs(r["lambda"] - lam) < 1e-12]
    if not rows:
        raise DataError(f"{what}: no rows at infection rate {lam}")
    out = {"node_count": n, "lambda": lam, "series": {}}
    for s in wanted:
        pts = sorted((r["t"], r[column]) for r in rows if r["series"] == s)
        if pts:
            out["series"][s] = (np.array([t for t, _ in pts]), np.array([v for _, v in pts]))
    _require(out["series"], wanted, what)
    return out


def extract_fig5(ds: Dataset, spec: FigureSpec) -> dict:
    """Infected fraction over time for the three topology arms."""
    return _timeseries_series(ds, spec, "mean_i_frac", "fig5")


def _draw_fig5(ax, data, spec):
    for s, (t, frac) in data["series"].items():
        ax.plot(t, frac, ms=3, label=s, **_STYLE[s])
    ax.set_xlabel("timestep")
    ax.set_ylabel("infected fraction")


def extract_fig6(ds: Dataset, spec: FigureSpec) -> dict:
    """Immunised fraction over time for the three topology arms."""
    return _timeseries_series(ds, spec, "mean_r_frac", "fig6")


def _draw_fig6(ax, data, spec):
    for s, (t, frac) in data["series"].items():
        ax.plot(t, frac, ms=3, label=s, **_STYLE[s])
    ax.set_xlabel("timestep")
    ax.set_ylabel("immunised fraction")


def extract_fig7(ds: Dataset, spec: FigureSpec) -> dict:
    """Epidemic peak position vs node count, MAC off vs on.

    The peak position is the earliest argmax of the stored mean infected
    curve; a lookup over timeseries rows, not a recomputation.
    """
    wanted = _want_series(spec, (RGG, RGG_MAC))
    rows = [r for r in ds.rows("timeseries.csv") if r["series"] in wanted]
    found = {r["series"] for r in rows}
    _require({s: True for s in found}, wanted, "fig7")
    lam = spec.lambda_select
    if lam is None:
        common = None
        for s in wanted:
            lams = {r["lambda"] for r in rows if r["series"] == s}
            common = lams if common is None else (common & lams)
        if not common:
            raise DataError("fig7: no infection rate is shared by all requested series")
        lam = max(common)
    rows = [r for r in rows if abs(r["lambda"] - lam) < 1e-12]
    out = {"lambda": lam, "series": {}}
    for s in wanted:
        t_max: dict[int, tuple[int, float]] = {}
        for r in sorted((r for r in rows if r["series"] == s), key=lambda r: (r["N"], r["t"])):
            best = t_max.get(r["N"])
            # strict improvement on t-ascending rows = earliest argmax
            if best is None or r["mean_i_frac"] > best[1]:
                t_max[r["N"]] = (r["t"], r["mean_i_frac"])
        ns = sorted(t_max)
        out["series"][s] = (np.array(ns), np.array([t_max[n][0] for n in ns]))
    return out


def _draw_fig7(ax, data, spec):
    for s, (ns, tmax) in data["series"].items():
        ax.plot(ns, tmax, ms=4, label=s, **_STYLE[s])
    ax.set_xlabel("number of devices")
    ax.set_ylabel(f"epidemic peak position at infection rate {data['lambda']:g}")


_DRAWERS = {
    "fig1": _draw_fig1,
    "fig2": _draw_fig2,
    "fig3": _draw_fig3,
    "fig4": _draw_fig4,
    "fig5": _draw_fig5,
    "fig6": _draw_fig6,
    "fig7": _draw_fig7,
}
