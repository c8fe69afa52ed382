"""Discrete panel phase optimization.

Four strategies over the uniform phase codebook:

* per-element alignment ("vt"): each element's reflected contribution is a
  fixed complex term tau_m rotated by the chosen phase; picking the codebook
  phase that minimizes the residual angle to the target symbol maximizes the
  element's projection, and the objective is separable across elements;
* cross-entropy search ("ce"): categorical sampling per element, elite
  refitting of the per-element probability columns, best-ever bookkeeping;
* coordinate sweep ("bcd"): exhaust one element's codebook at a time with the
  rest frozen;
* hybrids ("ce-vt", "bcd-vt"): refine the search output with the alignment
  rule under the searched solution's weights, keeping the refinement only if
  it does not lose objective.

All tie-breaks resolve toward the lowest codebook index so runs are
reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import LosChannelSet, ReceiverChannel


def wrap_angle(x):
    """Wrap to (-pi, pi]."""
    y = np.mod(np.asarray(x, dtype=float), 2.0 * np.pi)
    return np.where(y > np.pi, y - 2.0 * np.pi, y)


@dataclass(frozen=True)
class PhaseCodebook:
    """Uniform codebook of 2**bits phases starting at zero."""

    bits: int

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError("codebook needs at least one bit")

    @property
    def size(self) -> int:
        return 2**self.bits

    @property
    def phases(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.size) / self.size


@dataclass(frozen=True)
class PhaseConfig:
    """One panel configuration: a codebook index per element."""

    codebook: PhaseCodebook
    indices: tuple[int, ...]

    def __post_init__(self):
        if any(not 0 <= i < self.codebook.size for i in self.indices):
            raise ValueError("phase index outside codebook")

    def __len__(self) -> int:
        return len(self.indices)

    def phases(self) -> np.ndarray:
        return self.codebook.phases[list(self.indices)]

    def replace_element(self, m: int, index: int) -> "PhaseConfig":
        new = list(self.indices)
        new[m] = index
        return PhaseConfig(self.codebook, tuple(new))


def zero_config(codebook: PhaseCodebook, m: int) -> PhaseConfig:
    return PhaseConfig(codebook, (0,) * m)


@dataclass(frozen=True)
class VtTerms:
    """Per-element reflected contributions tau_m for one receiver.

    The cascade beam gain under phases phi is sum_m |tau_m| e^{j(phi_m +
    angle(tau_m))}; the residual angle of element m toward a target symbol
    phase is psi_m = wrap(phi_m + angle(tau_m) - target).
    """

    tau: np.ndarray  # (M,) complex

    def misalignment(self, phases: np.ndarray, target_phase: float) -> np.ndarray:
        return wrap_angle(np.asarray(phases) + np.angle(self.tau) - target_phase)

    def projection(self, phases: np.ndarray, target_phase: float) -> float:
        """Projection of the cascade gain onto the target symbol direction."""
        return float(np.sum(np.abs(self.tau) * np.cos(self.misalignment(phases, target_phase))))


def vt_terms(channels: LosChannelSet, weights: np.ndarray, receiver: ReceiverChannel) -> VtTerms:
    """Element terms tau_m = (G_bar w)_m * h_r_bar_m."""
    return VtTerms(tau=(channels.g_bar @ np.asarray(weights)) * receiver.h_r_bar)


def vt_select_single(terms: VtTerms, target_phase: float, codebook: PhaseCodebook) -> PhaseConfig:
    """Per-element codebook phase minimizing the residual angle to the target.

    Separable, hence exactly the configuration maximizing the projection of
    the cascade gain onto the target direction. Ties go to the lower index.
    """
    psi = wrap_angle(codebook.phases[None, :] + np.angle(terms.tau)[:, None] - target_phase)
    indices = np.argmin(np.abs(psi), axis=1)
    return PhaseConfig(codebook, tuple(int(i) for i in indices))


def worst_case_gain(terms: VtTerms, codebook: PhaseCodebook) -> float:
    """Guaranteed projection after alignment at the codebook's resolution.

    The residual angle never exceeds half the codebook spacing, so the
    projection is at least sum_m |tau_m| * cos(pi / 2**bits); zero at one bit.
    """
    return float(np.sum(np.abs(terms.tau)) * math.cos(math.pi / codebook.size))


def priority_matrix(terms: VtTerms, target_phase: float, codebook: PhaseCodebook) -> np.ndarray:
    """Codebook indices ranked per element by this receiver's projected gain.

    Row p of column m is the index of the p-th best phase for element m
    (rank 0 best). Equal-gain ties keep codebook order.
    """
    psi = wrap_angle(codebook.phases[None, :] + np.angle(terms.tau)[:, None] - target_phase)
    return np.argsort(np.abs(psi), axis=1, kind="stable").T  # (size, M)


def vt_select_multi(
    terms_list,
    target_phases,
    codebook: PhaseCodebook,
    eve_terms: VtTerms | None = None,
    eve_target_phase: float = 0.0,
) -> PhaseConfig:
    """Alignment rule when several users share the panel.

    Elements where every user ranks the same phase at the same priority take
    that phase (the highest shared rank wins, which every user weakly
    prefers). Elsewhere the fallback keeps the summed user projection
    nonnegative: without eavesdropper terms it maximizes the summed
    projection; with them it picks, among nonnegative-sum candidates, the
    phase that minimizes the eavesdropper's projection.
    """
    k_u = len(terms_list)
    if k_u < 1:
        raise ValueError("need at least one user")
    if k_u == 1:
        return vt_select_single(terms_list[0], float(target_phases[0]), codebook)
    m = len(terms_list[0].tau)
    size = codebook.size
    prios = [
        priority_matrix(terms_list[k], float(target_phases[k]), codebook) for k in range(k_u)
    ]  # each (size, M)
    # Per-user projected gain of every codebook phase at every element.
    gains = np.empty((k_u, size, m))
    for k in range(k_u):
        psi = wrap_angle(
            codebook.phases[:, None] + np.angle(terms_list[k].tau)[None, :] - float(target_phases[k])
        )
        gains[k] = np.abs(terms_list[k].tau)[None, :] * np.cos(psi)
    total = gains.sum(axis=0)  # (size, M)
    eve_gain = None
    if eve_terms is not None:
        psi_e = wrap_angle(
            codebook.phases[:, None] + np.angle(eve_terms.tau)[None, :] - eve_target_phase
        )
        eve_gain = np.abs(eve_terms.tau)[None, :] * np.cos(psi_e)

    indices = []
    for e in range(m):
        chosen = None
        for rank in range(size):
            first = prios[0][rank, e]
            if all(prios[k][rank, e] == first for k in range(1, k_u)):
                chosen = int(first)
                break
        if chosen is None:
            col = total[:, e]
            candidates = np.flatnonzero(col >= -1e-15)
            if candidates.size == 0:
                candidates = np.arange(size)
            if eve_gain is not None:
                chosen = int(candidates[np.argmin(eve_gain[candidates, e])])
            else:
                chosen = int(candidates[np.argmax(col[candidates])])
        indices.append(chosen)
    return PhaseConfig(codebook, tuple(indices))


def uniform_probability(codebook: PhaseCodebook, m: int) -> np.ndarray:
    return np.full((codebook.size, m), 1.0 / codebook.size)


def ce_sample(
    probability: np.ndarray, codebook: PhaseCodebook, count: int, rng: np.random.Generator
) -> list[PhaseConfig]:
    """Draw configurations column-independently from the categorical columns."""
    p = np.asarray(probability, dtype=float)
    size, m = p.shape
    if size != codebook.size:
        raise ValueError("probability rows must match the codebook size")
    if not np.allclose(p.sum(axis=0), 1.0, atol=1e-9):
        raise ValueError("probability columns must sum to one")
    cdf = np.cumsum(p, axis=0)
    cdf[-1] = 1.0
    u = rng.random((count, m))
    idx = np.empty((count, m), dtype=int)
    for col in range(m):
        idx[:, col] = np.searchsorted(cdf[:, col], u[:, col], side="right")
    idx = np.clip(idx, 0, size - 1)
    return [PhaseConfig(codebook, tuple(int(i) for i in row)) for row in idx]


def ce_update(
    elites,
    codebook: PhaseCodebook,
    previous: np.ndarray | None = None,
    smoothing: float = 1.0,
) -> np.ndarray:
    """Refit the per-element categorical columns to the elite samples.

    The constrained likelihood maximizer is the per-column relative frequency
    of each codebook phase among the elites; with ``smoothing`` < 1 the new
    matrix is blended with the previous one to avoid premature lock-in.
    """
    elites = list(elites)
    if not elites:
        raise ValueError("elite set must not be empty")
    m = len(elites[0])
    counts = np.zeros((codebook.size, m))
    for cfg in elites:
        counts[list(cfg.indices), np.arange(m)] += 1.0
    mle = counts / len(elites)
    if previous is None or smoothing >= 1.0:
        return mle
    return smoothing * mle + (1.0 - smoothing) * np.asarray(previous)


@dataclass(frozen=True)
class CeResult:
    best: PhaseConfig
    best_objective: float
    trace: tuple[tuple[int, float, float], ...]  # (iteration, iter best, best so far)
    iterations: int


def ce_optimize(
    objective,
    codebook: PhaseCodebook,
    m: int,
    samples: int,
    elites: int,
    max_iterations: int,
    rng: np.random.Generator,
    smoothing: float = 0.9,
    tol: float = 1e-6,
) -> CeResult:
    """Cross-entropy search over panel configurations.

    Keeps the best configuration ever sampled. Stops when the probability
    matrix is unchanged (entrywise within ``tol``) across three consecutive
    iterations, or after ``max_iterations``. Elite selection sorts by
    objective descending with sample order breaking ties.
    """
    if elites > samples:
        raise ValueError("elite count cannot exceed the sample count")
    if max_iterations < 3:
        raise ValueError("need at least three iterations for the stop rule")
    p = uniform_probability(codebook, m)
    history = [p]
    best_cfg = None
    best_val = -math.inf
    trace = []
    iterations = 0
    for it in range(max_iterations):
        iterations = it + 1
        configs = ce_sample(p, codebook, samples, rng)
        values = np.array([objective(c) for c in configs], dtype=float)
        order = np.argsort(-values, kind="stable")
        elite_cfgs = [configs[i] for i in order[:elites]]
        iter_best = float(values[order[0]])
        if best_cfg is None or iter_best > best_val:
            best_val = iter_best
            best_cfg = configs[order[0]]
        trace.append((it, iter_best, best_val))
        p = ce_update(elite_cfgs, codebook, previous=p, smoothing=smoothing)
        history.append(p)
        if len(history) >= 3:
            a, b, c = history[-3], history[-2], history[-1]
            if np.max(np.abs(c - b)) <= tol and np.max(np.abs(b - a)) <= tol:
                break
        history = history[-3:]
    return CeResult(best=best_cfg, best_objective=best_val, trace=tuple(trace), iterations=iterations)


@dataclass(frozen=True)
class BcdResult:
    best: PhaseConfig
    best_objective: float
    trace: tuple[tuple[int, float, float], ...]  # (element, chosen value, best so far)
    evaluations: int


def bcd_optimize(
    objective,
    codebook: PhaseCodebook,
    initial: PhaseConfig,
    until_stable: bool = False,
    max_sweeps: int = 16,
) -> BcdResult:
    """Coordinate sweep: exhaust each element's codebook with the rest frozen.

    A single ascending sweep by default (exactly M * 2**bits objective
    evaluations); with ``until_stable`` the sweep repeats until no element
    changes, which makes the output coordinate-wise locally optimal.
    """
    current = initial
    m = len(initial)
    trace = []
    evaluations = 0
    best_seen = -math.inf
    sweeps = max_sweeps if until_stable else 1
    for _ in range(sweeps):
        changed = False
        for e in range(m):
            vals = np.empty(codebook.size)
            for idx in range(codebook.size):
                vals[idx] = objective(current.replace_element(e, idx))
                evaluations += 1
            chosen = int(np.argmax(vals))
            if chosen != current.indices[e]:
                changed = True
            current = current.replace_element(e, chosen)
            best_seen = max(best_seen, float(vals[chosen]))
            trace.append((e, float(vals[chosen]), best_seen))
        if not changed:
            break
    final = float(objective(current)) if not trace else trace[-1][1]
    return BcdResult(best=current, best_objective=final, trace=tuple(trace), evaluations=evaluations)


def hybrid_vt(
    base: PhaseConfig,
    base_objective: float,
    objective,
    channels: LosChannelSet,
    weights: np.ndarray,
    target_phases,
    codebook: PhaseCodebook,
    eve_target_phase: float | None = None,
) -> tuple[PhaseConfig, float]:
    """Alignment refinement of a searched configuration, accepted only on gain.

    Recomputes the element terms under the searched solution's weights,
    applies the (multi-user) alignment rule, and keeps the refined
    configuration when its objective is at least the searched one's.
    """
    terms = [vt_terms(channels, weights, u) for u in channels.users]
    eve_terms = None
    eve_phase = 0.0
    if eve_target_phase is not None:
        eve_terms = vt_terms(channels, weights, channels.eve)
        eve_phase = eve_target_phase
    refined = vt_select_multi(
        terms, list(target_phases), codebook, eve_terms=eve_terms, eve_target_phase=eve_phase
    )
    refined_objective = float(objective(refined))
    if refined_objective >= base_objective:
        return refined, refined_objective
    return base, base_objective
