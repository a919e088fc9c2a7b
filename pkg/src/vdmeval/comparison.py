"""Rank-sum comparison of models and the better-than graph."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import EmptyInputError, InsufficientDataError
from .models import ModelId
from .predictability import PredictabilityAnalysis, Scenario
from .special import normal_sf

DEFAULT_ALPHA = 0.05
EXACT_MAX_N = 20


def _exact_upper_tail(ranks: np.ndarray, n1: int, observed: float) -> float:
    """P(sum of n1 ranks drawn without replacement >= observed)."""
    doubled = np.rint(2 * ranks).astype(np.int64)
    total = int(doubled.sum())
    ways = np.zeros((n1 + 1, total + 1))
    ways[0, 0] = 1.0
    for i, r in enumerate(doubled, 1):
        for k in range(min(i, n1), 0, -1):
            ways[k, r:] += ways[k - 1, :total + 1 - r]
    dist = ways[n1]
    threshold = int(math.ceil(2 * observed - 1e-9))
    return float(dist[threshold:].sum() / dist.sum())


def rank_sum_test_one_sided(x: Sequence[float], y: Sequence[float],
                            method: str = "auto") -> float:
    """p-value of the Wilcoxon rank-sum test for H1: x stochastically greater than y.

    ``method`` is ``"exact"``, ``"asymptotic"`` or ``"auto"`` (exact when
    the pooled size is at most 20). Ties get midranks; the asymptotic path
    uses the tie-corrected variance and a continuity correction.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n1, n2 = len(x), len(y)
    if n1 == 0 or n2 == 0:
        raise EmptyInputError("rank-sum test needs nonempty samples")
    n = n1 + n2
    ranks = rankdata(np.concatenate([x, y]))
    r1 = float(ranks[:n1].sum())
    if method == "auto":
        method = "exact" if n <= EXACT_MAX_N else "asymptotic"
    if method == "exact":
        return _exact_upper_tail(ranks, n1, r1)
    if method != "asymptotic":
        raise ValueError(f"unknown method {method!r}")
    u = r1 - n1 * (n1 + 1) / 2.0
    _, counts = np.unique(ranks, return_counts=True)
    ties = float(np.sum(counts ** 3 - counts))
    var = n1 * n2 / 12.0 * ((n + 1) - ties / (n * (n - 1)))
    if var <= 0:
        return 1.0
    z = (u - n1 * n2 / 2.0 - 0.5) / math.sqrt(var)
    return normal_sf(z)


def bonferroni_alpha(n_models: int, alpha: float = DEFAULT_ALPHA) -> float:
    """Significance level when each model is tested against every other."""
    if n_models < 2:
        return alpha
    return alpha / (n_models - 1)


class Basis(str, Enum):
    PREDICTABILITY = "predictability"
    QUALITY = "quality"
    BOTH = "both"
    INCONCLUSIVE = "inconclusive"


class Direction(str, Enum):
    A_BETTER = "a_better"
    B_BETTER = "b_better"
    NONE = "none"


@dataclass(frozen=True)
class ComparisonResult:
    model_a: ModelId
    model_b: ModelId
    basis: Basis
    direction: Direction
    p_values: tuple  # (predictability, quality), each for H1: a > b
    alpha_effective: float

    def __post_init__(self):
        if (self.basis is Basis.INCONCLUSIVE) != (self.direction is Direction.NONE):
            raise ValueError("basis is inconclusive exactly when direction is none")


def _decide(a, b, alpha):
    p_ab = rank_sum_test_one_sided(a, b)
    p_ba = rank_sum_test_one_sided(b, a)
    if p_ab < alpha:
        return Direction.A_BETTER, p_ab
    if p_ba < alpha:
        return Direction.B_BETTER, p_ab
    return Direction.NONE, p_ab


def compare_pair(model_a: ModelId, model_b: ModelId,
                 rho_a: Sequence[float], rho_b: Sequence[float],
                 quality_a: Sequence[float], quality_b: Sequence[float],
                 alpha_effective: float = DEFAULT_ALPHA) -> ComparisonResult:
    """Predictability first; temporal quality decides when that is inconclusive."""
    for name, values in (("predictability", rho_a), ("predictability", rho_b),
                         ("quality", quality_a), ("quality", quality_b)):
        if len(values) == 0:
            raise InsufficientDataError(f"no {name} values to compare")
    pred, p_pred = _decide(rho_a, rho_b, alpha_effective)
    qual, p_qual = _decide(quality_a, quality_b, alpha_effective)
    direction = pred if pred is not Direction.NONE else qual
    if direction is Direction.NONE:
        basis = Basis.INCONCLUSIVE
    elif pred is qual:
        basis = Basis.BOTH
    elif pred is direction:
        basis = Basis.PREDICTABILITY
    else:
        basis = Basis.QUALITY
    return ComparisonResult(ModelId(model_a), ModelId(model_b), basis, direction,
                            (p_pred, p_qual), alpha_effective)


EDGE_STYLE = {Basis.BOTH: "solid", Basis.PREDICTABILITY: "dashed",
              Basis.QUALITY: "dotted"}


@dataclass(frozen=True)
class Edge:
    source: ModelId
    target: ModelId
    style: str


@dataclass(frozen=True)
class ComparisonGraph:
    nodes: tuple
    edges: tuple
    alpha_effective: float
    results: tuple = field(default=(), compare=False)

    def __post_init__(self):
        seen = set()
        for e in self.edges:
            if e.source == e.target:
                raise ValueError("self-edge")
            if (e.source, e.target) in seen:
                raise ValueError("duplicate edge")
            seen.add((e.source, e.target))

    def in_degree(self, node) -> int:
        return sum(1 for e in self.edges if e.target == node)

    def out_degree(self, node) -> int:
        return sum(1 for e in self.edges if e.source == node)

    def best_models(self) -> list[ModelId]:
        """Nodes with no incoming edge and maximal out-degree (ties kept)."""
        roots = [n for n in self.nodes if self.in_degree(n) == 0]
        if not roots:
            return []
        top = max(self.out_degree(n) for n in roots)
        return [n for n in roots if self.out_degree(n) == top]

    def to_dot(self, name: str = "vdm_comparison") -> str:
        best = set(self.best_models()) if self.edges else set()
        lines = [f"digraph \"{name}\" {{",
                 f"  // alpha_effective = {self.alpha_effective:.6g}"]
        for n in self.nodes:
            shape = "doublecircle" if n in best else "circle"
            lines.append(f"  \"{n}\" [shape={shape}];")
        for e in self.edges:
            lines.append(f"  \"{e.source}\" -> \"{e.target}\" [style={e.style}];")
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_graph(models: Sequence[ModelId],
                predictability: Mapping[ModelId, Sequence[float]],
                quality: Mapping[ModelId, Sequence[float]],
                alpha: float = DEFAULT_ALPHA) -> ComparisonGraph:
    """Pairwise comparisons with a Bonferroni-corrected level."""
    models = [ModelId(m) for m in models]
    alpha_eff = bonferroni_alpha(len(models), alpha)
    edges, results = [], []
    for a, b in combinations(models, 2):
        res = compare_pair(a, b, predictability[a], predictability[b],
                           quality[a], quality[b], alpha_eff)
        results.append(res)
        if res.direction is Direction.A_BETTER:
            edges.append(Edge(a, b, EDGE_STYLE[res.basis]))
        elif res.direction is Direction.B_BETTER:
            edges.append(Edge(b, a, EDGE_STYLE[res.basis]))
    return ComparisonGraph(tuple(models), tuple(edges), alpha_eff, tuple(results))


def scenario_sets(analysis: PredictabilityAnalysis, models: Sequence[ModelId],
                  scenario: Scenario, tau_max: int | None = None):
    """Predictability and temporal-quality values over the scenario's horizons."""
    taus = [t for t in scenario.horizons if tau_max is None or t <= tau_max]
    rho, qual = {}, {}
    for m in models:
        m = ModelId(m)
        rho[m] = analysis.series(m, scenario.span, taus).values
        qual[m] = analysis.quality_series(m, taus).values
    return rho, qual


def compare_models(analysis: PredictabilityAnalysis, models: Sequence[ModelId],
                   scenario: Scenario, alpha: float = DEFAULT_ALPHA,
                   tau_max: int | None = None) -> ComparisonGraph:
    rho, qual = scenario_sets(analysis, models, scenario, tau_max)
    return build_graph(models, rho, qual, alpha)
