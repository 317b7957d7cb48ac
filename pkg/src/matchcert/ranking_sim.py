"""Monte Carlo simulation of generalized RANKING with a pluggable rank function.

Every offline vertex ``v`` draws a rank ``y_v`` and every online vertex ``u``
an arrival time ``y_u``, all uniform on [0, 1].  Online vertices arrive in
order of ``y_u``; each takes the unmatched neighbor with the largest
perturbed weight ``w_v (1 - g(y_v, y_u))``.  A matched edge splits its weight
into duals ``alpha_u = w_v g`` and ``alpha_v = w_v (1 - g)``.

Randomness: trial ``t`` under seed ``s`` uses numpy's PCG64 seeded with the
sequence ``[s, t, stream]`` (stream 0 for instance generation, 1 for draws),
so results do not depend on scheduling or worker count.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ParameterError, ParseError

INSTANCE_STREAM = 0
DRAW_STREAM = 1


def trial_rng(seed: int, trial: int, stream: int = DRAW_STREAM) -> np.random.Generator:
    return np.random.default_rng([seed, trial, stream])


@dataclass(frozen=True, eq=False)
class MatchInstance:
    num_online: int
    weights: np.ndarray
    edges: tuple  # ((u, v), ...), zero-indexed

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1:
            raise ParameterError("weights must be a flat sequence")
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise ParameterError("weights must be finite and nonnegative")
        if self.num_online < 0:
            raise ParameterError("online vertex count must be nonnegative")
        edges = tuple((int(u), int(v)) for u, v in self.edges)
        if len(set(edges)) != len(edges):
            raise ParameterError("duplicate edge")
        for u, v in edges:
            if not (0 <= u < self.num_online and 0 <= v < len(w)):
                raise ParameterError(f"edge ({u}, {v}) references a missing vertex")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "edges", edges)

    @property
    def num_offline(self) -> int:
        return len(self.weights)

    @cached_property
    def csr(self) -> tuple:
        """``(indptr, offline ids)`` with each online vertex's neighbors sorted by id."""
        order = sorted(self.edges)
        indptr = np.zeros(self.num_online + 1, dtype=np.int64)
        np.add.at(indptr, np.array([u + 1 for u, _ in order], dtype=np.int64), 1)
        return np.cumsum(indptr), np.array([v for _, v in order], dtype=np.int64)

    @cached_property
    def neighbors(self) -> tuple:
        indptr, ids = self.csr
        return tuple(ids[indptr[u]:indptr[u + 1]] for u in range(self.num_online))

    def to_text(self) -> str:
        lines = [f"{self.num_online} {self.num_offline}", " ".join(f"{w:.17g}" for w in self.weights)]
        lines += [f"{u} {v}" for u, v in self.edges]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MatchInstance":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        try:
            nu, nv = (int(tok) for tok in lines[0].split())
            weights = [float(tok) for tok in lines[1].split()] if nv else []
            body = lines[2:] if nv else lines[1:]
            edges = [tuple(int(tok) for tok in ln.split()) for ln in body]
        except (IndexError, ValueError) as exc:
            raise ParseError(f"malformed instance file: {exc}") from exc
        if len(weights) != nv or any(len(e) != 2 for e in edges):
            raise ParseError("instance file has the wrong number of weights or a malformed edge line")
        return cls(nu, np.array(weights), tuple(edges))


def read_instance(path) -> MatchInstance:
    with open(path) as fh:
        return MatchInstance.from_text(fh.read())


def write_instance(inst: MatchInstance, path) -> None:
    with open(path, "w") as fh:
        fh.write(inst.to_text())


# ---------------------------------------------------------------------------
# the online algorithm


@dataclass(frozen=True)
class RankingRun:
    y_offline: np.ndarray
    y_online: np.ndarray
    order: tuple
    matching: tuple  # ((u, v), ...) in arrival order
    alpha_online: np.ndarray
    alpha_offline: np.ndarray
    matched_weight: float

    @property
    def dual_total(self) -> float:
        return math.fsum(self.alpha_online) + math.fsum(self.alpha_offline)


def _edge_ranks(inst: MatchInstance, g, y_offline, y_online) -> np.ndarray:
    """``g(y_v, y_u)`` for every edge in CSR order, in one vectorized call."""
    indptr, ids = inst.csr
    if not ids.size:
        return np.empty(0)
    us = np.repeat(np.arange(inst.num_online), np.diff(indptr))
    return np.asarray(g(y_offline[ids], y_online[us]), dtype=float).reshape(ids.size)


def run_ranking(inst: MatchInstance, g: Callable, seed: int = 0, trial: int = 0, *,
                y_offline=None, y_online=None) -> RankingRun:
    """One run of generalized RANKING.

    Draws come from ``trial_rng(seed, trial)`` unless given explicitly.  Ties
    in arrival time go to the smaller online id and ties in perturbed weight
    to the smaller offline id.
    """
    if y_offline is None or y_online is None:
        rng = trial_rng(seed, trial)
        drawn_v = rng.random(inst.num_offline)
        drawn_u = rng.random(inst.num_online)
        y_offline = drawn_v if y_offline is None else y_offline
        y_online = drawn_u if y_online is None else y_online
    y_offline = np.asarray(y_offline, dtype=float)
    y_online = np.asarray(y_online, dtype=float)
    order = np.argsort(y_online, kind="stable")
    matched = np.zeros(inst.num_offline, dtype=bool)
    alpha_u = np.zeros(inst.num_online)
    alpha_v = np.zeros(inst.num_offline)
    indptr, ids = inst.csr
    ranks = _edge_ranks(inst, g, y_offline, y_online)
    scores = inst.weights[ids] * (1.0 - ranks)
    pairs = []
    total = []
    for u in order:
        lo, hi = indptr[u], indptr[u + 1]
        if lo == hi:
            continue
        open_ = ~matched[ids[lo:hi]]
        if not open_.any():
            continue
        score = np.where(open_, scores[lo:hi], -np.inf)
        best = lo + int(np.argmax(score))  # first maximum, neighbors sorted by id
        v = int(ids[best])
        w = inst.weights[v]
        matched[v] = True
        alpha_u[u] = w * ranks[best]
        alpha_v[v] = w - alpha_u[u]
        pairs.append((int(u), v))
        total.append(w)
    return RankingRun(y_offline, y_online, tuple(int(u) for u in order), tuple(pairs),
                      alpha_u, alpha_v, math.fsum(total))


# ---------------------------------------------------------------------------
# offline optimum


def offline_optimum(inst: MatchInstance) -> float:
    """Maximum vertex-weighted matching via the Hungarian method."""
    if not inst.edges:
        return 0.0
    W = np.zeros((inst.num_online, inst.num_offline))
    for u, v in inst.edges:
        W[u, v] = inst.weights[v]
    rows, cols = linear_sum_assignment(W, maximize=True)
    return math.fsum(W[rows, cols])


def brute_force_optimum(inst: MatchInstance) -> float:
    """Exhaustive search over matchings; small instances only."""
    if inst.num_online > 10 or inst.num_offline > 10:
        raise ParameterError("brute force is limited to 10 + 10 vertices")
    adj = inst.neighbors
    best = 0.0

    def extend(u, used, value):
        nonlocal best
        if u == inst.num_online:
            best = max(best, value)
            return
        extend(u + 1, used, value)
        for v in adj[u]:
            if not used >> int(v) & 1:
                extend(u + 1, used | (1 << int(v)), value + inst.weights[v])

    extend(0, 0, 0.0)
    return best


# ---------------------------------------------------------------------------
# instance families


def upper_triangular(size: int, rng=None) -> MatchInstance:
    """``u_i`` adjacent to ``v_j`` for ``j >= i``, unit weights."""
    edges = tuple((i, j) for i in range(size) for j in range(i, size))
    return MatchInstance(size, np.ones(size), edges)


def erdos_renyi(num_online: int, num_offline: int, p: float, rng: np.random.Generator,
                uniform_weights: bool = True) -> MatchInstance:
    if not 0.0 <= p <= 1.0:
        raise ParameterError("edge probability must lie in [0, 1]")
    mask = rng.random((num_online, num_offline)) < p
    weights = rng.random(num_offline) if uniform_weights else np.ones(num_offline)
    edges = tuple(zip(*np.nonzero(mask)))
    return MatchInstance(num_online, weights, edges)


def star(leaves: int, rng: np.random.Generator, center: str = "online") -> MatchInstance:
    """One center adjacent to ``leaves`` vertices on the other side.

    With an online center the leaves are offline vertices with uniform
    weights, so the ratio measures how often RANKING picks the heaviest one.
    """
    if center == "online":
        return MatchInstance(1, rng.random(leaves), tuple((0, v) for v in range(leaves)))
    if center == "offline":
        return MatchInstance(leaves, rng.random(1), tuple((u, 0) for u in range(leaves)))
    raise ParameterError("center must be 'online' or 'offline'")


# ---------------------------------------------------------------------------
# estimation


@dataclass(frozen=True)
class RatioEstimate:
    trials: int
    mean_ratio: float
    stderr: float
    min_ratio: float
    skipped: int = 0
    seed: int = 0
    max_dual_gap: float = 0.0  # worst |sum alpha - matched weight| seen


def _as_generator(source) -> Callable:
    if isinstance(source, MatchInstance):
        return lambda rng: source
    if callable(source):
        return source
    raise ParameterError("instance source must be a MatchInstance or a callable taking a generator")


def _one_trial(make, g, seed, t):
    inst = make(trial_rng(seed, t, INSTANCE_STREAM))
    opt = offline_optimum(inst)
    run = run_ranking(inst, g, seed, t)
    gap = abs(run.dual_total - run.matched_weight)
    return (None if opt <= 0 else run.matched_weight / opt), gap


def estimate_ratio(source, g: Callable, trials: int, seed: int = 0, workers: int = 1) -> RatioEstimate:
    """Mean of matched weight over offline optimum across seeded trials."""
    if trials < 1:
        raise ParameterError("trials must be at least 1")
    make = _as_generator(source)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda t: _one_trial(make, g, seed, t), range(trials)))
    else:
        results = [_one_trial(make, g, seed, t) for t in range(trials)]
    ratios = np.array([r for r, _ in results if r is not None])
    gap = max(gp for _, gp in results)
    skipped = trials - ratios.size
    if ratios.size == 0:
        return RatioEstimate(trials, math.nan, math.nan, math.nan, skipped, seed, gap)
    stderr = float(ratios.std(ddof=1) / math.sqrt(ratios.size)) if ratios.size > 1 else 0.0
    return RatioEstimate(trials, float(ratios.mean()), stderr, float(ratios.min()), skipped, seed, gap)


@dataclass(frozen=True)
class DualCoverageReport:
    beta: float
    trials: int
    seed: int
    edges: tuple
    means: np.ndarray = field(repr=False)  # estimate of E[alpha_u + alpha_v] / w_v per edge
    stderrs: np.ndarray = field(repr=False)
    flagged: tuple = ()

    @property
    def passed(self) -> bool:
        return not self.flagged


def dual_coverage_check(inst: MatchInstance, g: Callable, trials: int, beta: float,
                        seed: int = 0) -> DualCoverageReport:
    """Per-edge Monte Carlo estimate of ``E[alpha_u + alpha_v] / w_v``.

    Edges whose estimate is more than three standard errors below ``beta``
    are flagged.  Zero-weight edges are skipped.
    """
    if not 0.0 <= beta <= 1.0:
        raise ParameterError("beta must lie in [0, 1]")
    if trials < 2:
        raise ParameterError("need at least two trials for a standard error")
    edges = tuple(e for e in inst.edges if inst.weights[e[1]] > 0)
    us = np.array([u for u, _ in edges], dtype=np.int64)
    vs = np.array([v for _, v in edges], dtype=np.int64)
    samples = np.empty((trials, len(edges)))
    for t in range(trials):
        run = run_ranking(inst, g, seed, t)
        samples[t] = (run.alpha_online[us] + run.alpha_offline[vs]) / inst.weights[vs]
    means = samples.mean(axis=0)
    stderrs = samples.std(axis=0, ddof=1) / math.sqrt(trials)
    flagged = tuple(edges[k] for k in np.flatnonzero(means < beta - 3 * stderrs))
    return DualCoverageReport(beta, trials, seed, edges, means, stderrs, flagged)


def all_matchings(inst: MatchInstance):
    """Iterate every matching as a tuple of edges (tiny instances, for tests)."""
    edges = inst.edges
    for r in range(min(inst.num_online, inst.num_offline) + 1):
        for combo in itertools.combinations(edges, r):
            us = {u for u, _ in combo}
            vs = {v for _, v in combo}
            if len(us) == r and len(vs) == r:
                yield combo
