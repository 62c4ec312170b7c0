"""Observables over Monte Carlo ensembles: prevalence curves, epidemic
thresholds, scaling collapse in the rescaled infection rate, and
spreading-speed metrics.

All functions here are pure consumers of ensemble output; they hold no
mutable state and are safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .epidemic import EnsembleStats, EpidemicParams, ensemble
from .rng import derive_seed
from .spatial_graph import Graph, GraphKind, NetworkConfig

TOPOLOGY_RG = "RG"
TOPOLOGY_RGG = "RGG"
TOPOLOGY_RGG_MAC = "RGG+MAC"

#: prevalence level that marks the supercritical onset for curve crossing
ONSET_CUTOFF = 0.01


class RegimeNotBracketedError(ValueError):
    """The curve does not span both sub- and supercritical regimes."""


class InsufficientGrowthDataError(ValueError):
    """Too few usable points to classify the early growth."""


class ThresholdMethod(Enum):
    SUSCEPTIBILITY_PEAK = "susceptibility_peak"
    CUTOFF_CROSSING = "cutoff_crossing"


class GrowthClass(Enum):
    CONSISTENT_WITH_EXPONENTIAL = "consistent_with_exponential"
    SLOWER_THAN_EXPONENTIAL = "slower_than_exponential"


@dataclass(frozen=True)
class EnsembleSettings:
    """How much Monte Carlo to spend per curve point, and on which seeds."""

    n_runs: int = 500
    n_seed_nodes: int = 5
    master_seed: int = 0
    n_workers: int = 1


@dataclass(frozen=True)
class CurvePoint:
    infection_rate: float
    prevalence_mean: float
    prevalence_conditional: float
    susceptibility: float
    std_error: float


@dataclass(frozen=True)
class PrevalenceCurve:
    """Final outbreak fraction versus infection rate for one topology arm."""

    points: tuple[CurvePoint, ...]
    topology_kind: str
    network_config: NetworkConfig
    mean_degree: float

    def __post_init__(self) -> None:
        lams = [p.infection_rate for p in self.points]
        if any(b <= a for a, b in zip(lams, lams[1:])):
            raise ValueError("curve points must be strictly increasing in infection rate")

    @property
    def infection_rates(self) -> np.ndarray:
        return np.array([p.infection_rate for p in self.points])

    @property
    def prevalences(self) -> np.ndarray:
        return np.array([p.prevalence_mean for p in self.points])

    @property
    def susceptibilities(self) -> np.ndarray:
        return np.array([p.susceptibility for p in self.points])


@dataclass(frozen=True)
class ThresholdEstimate:
    lambda_c: float
    method: ThresholdMethod
    uncertainty: float
    kappa_c: float


@dataclass(frozen=True)
class CollapseSeries:
    node_count: int
    kappa: np.ndarray
    prevalence: np.ndarray


@dataclass(frozen=True)
class CollapseResult:
    """Curves rescaled to kappa = lambda * mean_degree, plus a quality score:
    the maximum pairwise vertical deviation over the comparison window."""

    series: tuple[CollapseSeries, ...]
    max_deviation: float
    window: tuple[float, float]


@dataclass(frozen=True)
class SpeedMetrics:
    """Peak timing of the ensemble-mean infected fraction."""

    t_max: int
    peak_height: float
    growth_profile: np.ndarray


@dataclass(frozen=True)
class GrowthFit:
    classification: GrowthClass
    slope: float
    intercept: float
    r_squared: float
    n_points: int


def topology_label(kind: GraphKind, mac_enabled: bool) -> str:
    if kind is GraphKind.ER:
        return TOPOLOGY_RG
    return TOPOLOGY_RGG_MAC if mac_enabled else TOPOLOGY_RGG


def sweep_prevalence(
    g: Graph,
    lambda_grid,
    patching_rate: float,
    mac_enabled: bool,
    settings: EnsembleSettings,
) -> PrevalenceCurve:
    """One ensemble per grid point over a shared graph instance.

    The per-point master seed is keyed by the infection rate value (not its
    grid position), so refining a grid later reuses identical streams for
    the points it shares with the original sweep.
    """
    lams = [float(x) for x in lambda_grid]
    if not lams or any(b <= a for a, b in zip(lams, lams[1:])):
        raise ValueError("lambda_grid must be nonempty and sorted strictly increasing")
    points = []
    for lam in lams:
        params = EpidemicParams(lam, patching_rate, mac_enabled)
        stats = ensemble(
            g,
            params,
            settings.n_runs,
            settings.n_seed_nodes,
            derive_seed(settings.master_seed, "lambda", lam),
            n_workers=settings.n_workers,
        )
        points.append(
            CurvePoint(
                infection_rate=lam,
                prevalence_mean=stats.prevalence_mean,
                prevalence_conditional=stats.prevalence_conditional,
                susceptibility=stats.susceptibility,
                std_error=stats.std_error,
            )
        )
    return PrevalenceCurve(
        points=tuple(points),
        topology_kind=topology_label(g.kind, mac_enabled),
        network_config=g.config,
        mean_degree=2.0 * g.n_edges / g.n_nodes,
    )


def merge_curves(a: PrevalenceCurve, b: PrevalenceCurve) -> PrevalenceCurve:
    """Union of two sweeps of the same arm (e.g. base grid plus refinement)."""
    if a.topology_kind != b.topology_kind or a.network_config != b.network_config:
        raise ValueError("can only merge curves of the same arm")
    seen: dict[float, CurvePoint] = {}
    for pt in a.points + b.points:
        seen.setdefault(pt.infection_rate, pt)
    points = tuple(sorted(seen.values(), key=lambda p: p.infection_rate))
    return PrevalenceCurve(points, a.topology_kind, a.network_config, a.mean_degree)


def mean_field_threshold(mean_degree: float) -> float:
    """Homogeneous-mixing threshold 1 / mean_degree."""
    if not mean_degree > 0:
        raise ValueError("mean_degree must be positive")
    return 1.0 / mean_degree


def threshold_grid(mean_degree: float, lo: float = 0.5, hi: float = 2.5, spacing: float = 1.1) -> np.ndarray:
    """Geometric infection-rate grid spanning [lo, hi] / mean_degree.

    Consecutive points differ by a factor <= `spacing`; the default span
    brackets the threshold of every topology arm at these densities.
    """
    lam_lo = lo / mean_degree
    lam_hi = hi / mean_degree
    n = max(2, math.ceil(math.log(lam_hi / lam_lo) / math.log(spacing)) + 1)
    return np.geomspace(lam_lo, lam_hi, n)


def refinement_lambdas(curve: PrevalenceCurve, half_width: int = 2) -> list[float]:
    """Geometric midpoints around the susceptibility peak, for a second pass."""
    chi = curve.susceptibilities
    lams = curve.infection_rates
    i = int(np.argmax(chi))
    lo = max(0, i - half_width)
    hi = min(lams.size - 1, i + half_width)
    existing = set(lams.tolist())
    new = []
    for a, b in zip(lams[lo:hi], lams[lo + 1 : hi + 1]):
        mid = math.sqrt(a * b)
        if mid not in existing:
            new.append(mid)
    return sorted(new)


def scan_threshold(
    g: Graph,
    patching_rate: float,
    mac_enabled: bool,
    settings: EnsembleSettings,
    grid=None,
) -> PrevalenceCurve:
    """Base geometric sweep plus one refinement pass around the peak."""
    mean_degree = 2.0 * g.n_edges / g.n_nodes
    base = threshold_grid(mean_degree) if grid is None else np.asarray(grid, dtype=float)
    curve = sweep_prevalence(g, base, patching_rate, mac_enabled, settings)
    extra = refinement_lambdas(curve)
    if extra:
        refined = sweep_prevalence(g, extra, patching_rate, mac_enabled, settings)
        curve = merge_curves(curve, refined)
    return curve


def estimate_threshold(
    curve: PrevalenceCurve,
    method: ThresholdMethod = ThresholdMethod.SUSCEPTIBILITY_PEAK,
) -> ThresholdEstimate:
    """Locate the epidemic threshold on a prevalence curve.

    SUSCEPTIBILITY_PEAK: infection rate at the maximum of the outbreak-size
    susceptibility, refined by a quadratic through the peak and its two
    neighbors.  CUTOFF_CROSSING: first crossing of prevalence above the 1%
    onset cutoff, linearly interpolated.  Uncertainty is half the local
    grid spacing.  Raises RegimeNotBracketedError when the curve does not
    span the transition.
    """
    lams = curve.infection_rates
    if lams.size < 3:
        raise RegimeNotBracketedError("need at least 3 curve points")
    if method is ThresholdMethod.SUSCEPTIBILITY_PEAK:
        chi = curve.susceptibilities
        i = int(np.argmax(chi))
        if i == 0 or i == lams.size - 1:
            raise RegimeNotBracketedError("susceptibility has no interior maximum")
        lam_c = _parabola_vertex(lams[i - 1 : i + 2], chi[i - 1 : i + 2])
        lam_c = float(np.clip(lam_c, lams[i - 1], lams[i + 1]))
        uncertainty = (lams[i + 1] - lams[i - 1]) / 4.0
    else:
        prev = curve.prevalences
        above = prev > ONSET_CUTOFF
        if not above.any():
            raise RegimeNotBracketedError("prevalence never exceeds the onset cutoff")
        j = int(np.argmax(above))
        if j == 0:
            raise RegimeNotBracketedError("curve starts above the onset cutoff")
        frac = (ONSET_CUTOFF - prev[j - 1]) / (prev[j] - prev[j - 1])
        lam_c = float(lams[j - 1] + frac * (lams[j] - lams[j - 1]))
        uncertainty = (lams[j] - lams[j - 1]) / 2.0
    return ThresholdEstimate(
        lambda_c=lam_c,
        method=method,
        uncertainty=float(uncertainty),
        kappa_c=lam_c * curve.mean_degree,
    )


def scaling_collapse(curves, window: tuple[float, float] = (1.0, 2.5)) -> CollapseResult:
    """Rescale curves to kappa = lambda * mean_degree and score their overlap.

    The score is the maximum over a common kappa grid of the spread between
    interpolated prevalence values; identical curves score 0.  Input order
    does not matter.
    """
    curves = list(curves)
    if len(curves) < 2:
        raise ValueError("need at least 2 curves to collapse")
    kinds = {c.topology_kind for c in curves}
    if len(kinds) > 1:
        raise ValueError(f"curves mix topology kinds: {sorted(kinds)}")
    series = tuple(
        CollapseSeries(
            node_count=c.network_config.node_count,
            kappa=c.infection_rates * c.mean_degree,
            prevalence=c.prevalences,
        )
        for c in sorted(curves, key=lambda c: c.network_config.node_count)
    )
    lo = max(window[0], max(s.kappa[0] for s in series))
    hi = min(window[1], min(s.kappa[-1] for s in series))
    if not lo < hi:
        raise ValueError("curves do not overlap the collapse window")
    grid = np.linspace(lo, hi, 121)
    values = np.stack([np.interp(grid, s.kappa, s.prevalence) for s in series])
    max_dev = float((values.max(axis=0) - values.min(axis=0)).max())
    return CollapseResult(series=series, max_deviation=max_dev, window=(float(lo), float(hi)))


def speed_metrics(stats: EnsembleStats) -> SpeedMetrics:
    """Peak position of the ensemble-mean infected fraction (earliest argmax)."""
    curve = np.asarray(stats.mean_i_curve, dtype=float)
    if curve.size == 0:
        raise ValueError("empty mean infected curve")
    t_max = int(np.argmax(curve))
    return SpeedMetrics(
        t_max=t_max,
        peak_height=float(curve[t_max]),
        growth_profile=curve[: t_max + 1].copy(),
    )


def growth_classification(
    profile,
    node_count: int,
    noise_floor: float = 10.0,
    min_points: int = 4,
    r2_threshold: float = 0.98,
    saturation_fraction: float = 0.5,
) -> GrowthFit:
    """Classify early epidemic growth as exponential or slower.

    Fits log I(t) against t over the pre-saturation rise: every point of
    `profile` with a nonzero mean count strictly below
    `saturation_fraction` of the profile peak.  Cutting at half peak keeps
    the fit on the growth phase proper; a fast epidemic flattens onto a
    per-step infection ceiling well before its counted peak, and those
    plateau points say nothing about how the rise scaled.  Growth is
    consistent with exponential when the fit explains R^2 >= `r2_threshold`
    with a positive slope.  Requires `min_points` usable points and a
    profile clearing `noise_floor` expected infected at its peak; raises
    InsufficientGrowthDataError otherwise.
    """
    counts = np.asarray(profile, dtype=float) * node_count
    if counts.size == 0 or counts.max() < noise_floor:
        peak = counts.max() if counts.size else 0.0
        raise InsufficientGrowthDataError(
            f"profile peaks at {peak:.2f} expected infected, below the "
            f"noise floor of {noise_floor:g}"
        )
    t = np.flatnonzero((counts > 0.0) & (counts < saturation_fraction * counts.max()))
    if t.size < min_points:
        raise InsufficientGrowthDataError(
            f"only {t.size} pre-saturation growth points, need {min_points}"
        )
    y = np.log(counts[t])
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float((resid**2).sum()) / ss_tot
    if r2 >= r2_threshold and slope > 0:
        cls = GrowthClass.CONSISTENT_WITH_EXPONENTIAL
    else:
        cls = GrowthClass.SLOWER_THAN_EXPONENTIAL
    return GrowthFit(
        classification=cls,
        slope=float(slope),
        intercept=float(intercept),
        r_squared=r2,
        n_points=int(t.size),
    )


def _parabola_vertex(x: np.ndarray, y: np.ndarray) -> float:
    (x1, x2, x3), (y1, y2, y3) = x, y
    denom = (x2 - x1) * (y2 - y3) - (x2 - x3) * (y2 - y1)
    if denom == 0.0:
        return float(x2)
    num = (x2 - x1) ** 2 * (y2 - y3) - (x2 - x3) ** 2 * (y2 - y1)
    return float(x2 - num / (2.0 * denom))
