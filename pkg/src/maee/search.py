"""Multi-round sequential update of antenna positions on the candidate grid."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .problem import Problem


@dataclass
class SearchResult:
    idx: np.ndarray
    value: float
    trace: list = field(default_factory=list)  # objective after every (round, antenna) step
    round_values: list = field(default_factory=list)
    rounds: int = 0
    evaluations: int = 0
    converged: bool = False


def feasible_candidates(problem: Problem, idx, n: int) -> np.ndarray:
    """Grid indices antenna ``n`` may move to with the other antennas held fixed.

    Every candidate keeps the minimum spacing to all other antennas and stays
    within the travel radius of the initial position of antenna ``n``.
    """
    c0 = problem.cpv_idx[n]
    lo = max(0, c0 - problem.max_travel)
    hi = min(problem.grid.count - 1, c0 + problem.max_travel)
    cand = np.arange(lo, hi + 1)
    others = np.delete(np.asarray(idx), n)
    if others.size:
        ok = np.all(np.abs(cand[:, None] - others[None, :]) >= problem.min_gap, axis=1)
        cand = cand[ok]
    return cand


def pick_best(values, cand, origin: int, rtol: float = 1e-12) -> int:
    """Position of the best candidate; near-ties go to the one closest to ``origin``,
    then to the smaller index."""
    best = np.max(values)
    tie = values >= best - rtol * abs(best)
    pool = np.flatnonzero(tie)
    order = np.lexsort((cand[pool], np.abs(cand[pool] - origin)))
    return int(pool[order[0]])


def sequential_update(problem: Problem, objective, start=None, eps: float = 1e-4,
                      max_rounds: int = 50) -> SearchResult:
    """Maximise ``objective`` one antenna at a time over its feasible grid points.

    ``objective`` maps index arrays of shape (C, N) to values of shape (C,).
    Rounds repeat until the fractional gain of a full round drops below ``eps``.
    """
    idx = np.array(problem.cpv_idx if start is None else start, dtype=int)
    value = float(objective(idx[None, :])[0])
    res = SearchResult(idx=idx, value=value, trace=[value], round_values=[value])
    evaluations = 1
    for r in range(1, max_rounds + 1):
        before = value
        for n in range(problem.n):
            cand = feasible_candidates(problem, idx, n)
            batch = np.repeat(idx[None, :], cand.size, axis=0)
            batch[:, n] = cand
            vals = objective(batch)
            evaluations += cand.size
            j = pick_best(vals, cand, problem.cpv_idx[n])
            idx[n] = cand[j]
            value = float(vals[j])
            res.trace.append(value)
        res.rounds = r
        res.round_values.append(value)
        if value - before < eps * abs(before) or value == before:
            res.converged = True
            break
    res.idx, res.value, res.evaluations = idx, value, evaluations
    return res


def exhaustive_search(problem: Problem, objective):
    """Best feasible DPV by full enumeration; only for tiny N and M (test oracle)."""
    import itertools

    M, n = problem.grid.count, problem.n
    ranges = [range(max(0, c - problem.max_travel), min(M - 1, c + problem.max_travel) + 1)
              for c in problem.cpv_idx]
    combos = np.array([c for c in itertools.product(*ranges)
                       if all(abs(c[i] - c[j]) >= problem.min_gap
                              for i in range(n) for j in range(i + 1, n))], dtype=int)
    vals = objective(combos)
    j = int(np.argmax(vals))
    return combos[j], float(vals[j])
