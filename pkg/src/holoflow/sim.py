"""Ground truth for slow-manifold membership: invariance residuals and benchmark tables."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import IntegrationFailure
from .expr import Expr, eval_ast, parse_expression, variables
from .field import VectorField, builtin_field, eval_field
from .integrator import IntegratorConfig
from .spectral import (EQUILIBRIUM, OFF_SIM, ON_SIM, classify_sim_membership,
                       imaginary_time_spectrum, suggest_fast_band)

UNCLASSIFIED = "Unclassified"
ON_SIM_CUTOFF = 1e-12


@dataclass(frozen=True)
class SimGraph:
    """Candidate manifold x_fast = h(x_slow).

    ``h`` holds one expression per fast coordinate, written over the
    original variable names of the slow coordinates (1-based indices).
    """

    slow: tuple[int, ...]
    fast: tuple[int, ...]
    h: tuple[Expr, ...]

    def __post_init__(self):
        if set(self.slow) & set(self.fast):
            raise ValueError("slow and fast index sets must be disjoint")
        n = len(self.slow) + len(self.fast)
        if set(self.slow) | set(self.fast) != set(range(1, n + 1)):
            raise ValueError("slow and fast indices must partition 1..n")
        if len(self.h) != len(self.fast):
            raise ValueError("need one graph expression per fast coordinate")
        for expr in self.h:
            stray = variables(expr) - set(self.slow)
            if stray:
                raise ValueError(f"graph refers to non-slow variables {sorted(stray)}")

    @property
    def dimension(self) -> int:
        return len(self.slow) + len(self.fast)

    @classmethod
    def from_sources(cls, slow: Sequence[int], fast: Sequence[int], sources: Sequence[str]) -> "SimGraph":
        n = len(slow) + len(fast)
        return cls(tuple(slow), tuple(fast), tuple(parse_expression(s, n) for s in sources))

    def lift(self, slow_point: Sequence[complex], params=None) -> np.ndarray:
        """Full state (x_slow, h(x_slow))."""
        z = np.zeros(self.dimension, dtype=complex)
        for i, v in zip(self.slow, slow_point):
            z[i - 1] = v
        for i, expr in zip(self.fast, self.h):
            z[i - 1] = eval_ast(expr, z, params)
        return z


def known_graph(name: str) -> SimGraph:
    if name == "linear2d":
        return SimGraph.from_sources([1], [2], ["0"])
    if name == "davis_skodje":
        return SimGraph.from_sources([1], [2], ["x1/(1+x1)"])
    raise ValueError(f"no known slow manifold for {name!r}")


def invariance_residual(field: VectorField, graph: SimGraph, slow_point: Sequence[complex],
                        rel_step: float = 1e-6) -> np.ndarray:
    """R = Dh(x_s) f_s(x_s, h(x_s)) - f_f(x_s, h(x_s)); zero iff the graph is invariant.

    Dh uses central differences with step ``rel_step * max(1, |x_s_i|)``.
    """
    if graph.dimension != field.dimension:
        raise ValueError("graph and field dimensions differ")
    xs = np.array(slow_point, dtype=complex)
    params = field.param_map
    z = graph.lift(xs, params)
    F = eval_field(field, z)
    f_slow = F[[i - 1 for i in graph.slow]]
    f_fast = F[[i - 1 for i in graph.fast]]
    Dh = np.empty((len(graph.fast), len(graph.slow)), dtype=complex)
    for m in range(len(graph.slow)):
        step = rel_step * max(1.0, abs(xs[m]))
        xp, xm = xs.copy(), xs.copy()
        xp[m] += step
        xm[m] -= step
        hp = graph.lift(xp, params)[[i - 1 for i in graph.fast]]
        hm = graph.lift(xm, params)[[i - 1 for i in graph.fast]]
        Dh[:, m] = (hp - hm) / (2 * step)
    return Dh @ f_slow - f_fast


@dataclass(frozen=True)
class Truth:
    verdict: str
    distance: float


def benchmark_truth(name: str, gamma: float, point: Sequence[float]) -> Truth:
    """Distance from a real point to the known slow manifold of a builtin benchmark."""
    x, y = (float(v) for v in point)
    if name == "linear2d":
        d = abs(y)
    elif name == "davis_skodje":
        if x == -1.0:
            raise ValueError("point lies on the Davis-Skodje pole x = -1")
        d = abs(y - x / (1.0 + x))
    else:
        raise ValueError(f"no benchmark truth for {name!r}")
    return Truth(ON_SIM if d < ON_SIM_CUTOFF else OFF_SIM, d)


@dataclass(frozen=True)
class SpectralSettings:
    sigma_anchor: float = 0.0
    tau_span: float = 16 * math.pi
    n: int = 1024
    window: str = "hann"
    epsilon: float = 1e-4
    power_floor: float = 1e-18
    band: tuple[float, float] | None = None
    slow_dimension: int = 1
    equilibrium: tuple[float, ...] | None = None


def resolve_band(field: VectorField, settings: SpectralSettings) -> tuple[float, float]:
    if settings.band is not None:
        return tuple(settings.band)
    eq = settings.equilibrium if settings.equilibrium is not None else (0.0,) * field.dimension
    return suggest_fast_band(field, eq, settings.slow_dimension)


def classify_point(field: VectorField, z0, settings: SpectralSettings, band,
                   cfg: IntegratorConfig | None = None):
    spec = imaginary_time_spectrum(field, z0, settings.sigma_anchor, settings.tau_span, settings.n,
                                   settings.window, cfg)
    return spec, classify_sim_membership(spec, band, settings.epsilon, settings.power_floor)


def _agrees(verdict: str, truth: str) -> bool:
    # an equilibrium lies on the slow manifold of both benchmarks
    if verdict == EQUILIBRIUM:
        return truth == ON_SIM
    return verdict == truth


@dataclass
class ValidationTable:
    band: tuple[float, float]
    points: list[dict] = field(default_factory=list)

    @property
    def total(self) -> int:
        return len(self.points)

    def count(self, outcome: str) -> int:
        return sum(p["outcome"] == outcome for p in self.points)

    @property
    def correct(self) -> int:
        return self.count("correct")

    @property
    def incorrect(self) -> int:
        return self.count("incorrect")

    @property
    def unclassified(self) -> int:
        return self.count("unclassified")

    def confusion(self) -> dict:
        table = {t: {v: 0 for v in (ON_SIM, OFF_SIM, EQUILIBRIUM, UNCLASSIFIED)} for t in (ON_SIM, OFF_SIM)}
        for p in self.points:
            table[p["truth"]][p["verdict"]] += 1
        return table

    def to_dict(self) -> dict:
        return {
            "band": list(self.band),
            "total": self.total,
            "correct": self.correct,
            "incorrect": self.incorrect,
            "unclassified": self.unclassified,
            "confusion": self.confusion(),
            "points": self.points,
        }


def validate_point(name: str, gamma: float, point, settings: SpectralSettings, band,
                   cfg: IntegratorConfig | None = None) -> dict:
    field_ = builtin_field(name, gamma=gamma)
    truth = benchmark_truth(name, gamma, point)
    entry = {"point": [float(v) for v in point], "truth": truth.verdict, "distance": truth.distance}
    try:
        _, report = classify_point(field_, point, settings, band, cfg)
    except IntegrationFailure as exc:
        entry.update(verdict=UNCLASSIFIED, ratio=None, outcome="unclassified", message=str(exc))
        return entry
    entry.update(verdict=report.verdict, ratio=report.ratio,
                 outcome="correct" if _agrees(report.verdict, truth.verdict) else "incorrect")
    return entry


def classifier_validation(name: str, gamma: float, points: Sequence[Sequence[float]],
                          settings: SpectralSettings | None = None,
                          cfg: IntegratorConfig | None = None, map_fn=map) -> ValidationTable:
    """Classify every point spectrally and compare with the benchmark truth.

    ``map_fn`` may be an executor's ``map``; results keep input order.
    """
    settings = settings or SpectralSettings()
    band = resolve_band(builtin_field(name, gamma=gamma), settings)
    table = ValidationTable(tuple(float(b) for b in band))
    n = len(points)
    entries = map_fn(validate_point, [name] * n, [gamma] * n, list(points), [settings] * n,
                     [band] * n, [cfg] * n)
    table.points.extend(entries)
    return table
