"""Concave extension with dual certificates, and the Eisenberg-Gale solver.

The concave extension v+(x) of a valuation at fractional item masses x is
the LP value of the best distribution over item sets consistent with x.
It is computed by column generation: the demand oracle is exactly the
separation oracle of the dual, so each round either certifies optimality
(no set beats its price) or contributes a new column. The returned dual
pair (q, p) satisfies q + p(S) >= v(S) for every set over the universe,
which is what makes the log-supergradient construction sound.

`solve_eg` maximizes sum_i log v+_i(x_i) over the per-item capacity
polytope with an interior floor x >= eps, by projected supergradient
ascent with diminishing steps. The floor is what converts approximate
optimality into the scaled-optimum contract checked by
`scaled_optimum_check`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ._lp import maximize
from .model import Instance, ItemFractional
from .oracle import exact_config_lp
from .valuations import Valuation, demand


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, gap: float):
        super().__init__(f"{message} (remaining gap {gap:.3e})")
        self.gap = gap


@dataclass
class ConcaveExtValue:
    """v+(x) with its primal decomposition and dual certificate.

    Invariants on every return: value equals both the column mixture value
    and q + p.x (strong duality), every column respects the item masses,
    and the weights sum to one.
    """

    value: float
    q: float
    prices: np.ndarray
    columns: list[tuple[frozenset[int], float]]
    rounds: int
    pool: list[frozenset[int]] = field(default_factory=list, repr=False)


def _solve_restricted(v: Valuation, cols: list[frozenset[int]],
                      universe: np.ndarray, x: np.ndarray):
    n_cols = len(cols)
    a_ub = np.zeros((universe.size, n_cols))
    pos = {int(j): r for r, j in enumerate(universe)}
    c = np.empty(n_cols)
    for k, col in enumerate(cols):
        c[k] = v.value(col)
        for j in col:
            a_ub[pos[j], k] = 1.0
    res = maximize(c, a_ub=a_ub, b_ub=x[universe],
                   a_eq=np.ones((1, n_cols)), b_eq=np.array([1.0]))
    return res, c


def concave_ext(v: Valuation, x, items: Iterable[int] | None = None,
                method: str = "colgen", tol: float = 1e-9,
                max_rounds: int = 500,
                initial_columns: Sequence[frozenset[int]] | None = None) -> ConcaveExtValue:
    """Concave extension of v at item masses x over the given universe.

    method="colgen" runs demand-oracle column generation and certifies the
    dual over every subset of the universe. method="enumerate" solves the
    LP over all subsets of the support of x in one shot (desk-scale
    fallback; its dual is only certified on the enumerated sets).
    """
    x = np.asarray(x, dtype=float)
    universe = (np.arange(v.m, dtype=np.int64) if items is None
                else np.unique(np.fromiter(items, dtype=np.int64)))
    if x[universe].min() < -tol or x[universe].max() > 1 + tol:
        raise ValueError("item masses must lie in [0, 1]")
    support = [int(j) for j in universe if x[j] > 0]

    cols: list[frozenset[int]] = [frozenset()]
    cols.extend(frozenset({int(j)}) for j in universe)
    if method == "enumerate":
        if len(support) > 20:
            raise ValueError("enumeration fallback supports at most 20 support items")
        for mask in range(1, 1 << len(support)):
            sub = frozenset(support[t] for t in range(len(support)) if mask >> t & 1)
            if len(sub) > 1:
                cols.append(sub)
    elif method != "colgen":
        raise ValueError(f"unknown method {method!r}")
    seen = set(cols)
    allowed = frozenset(int(j) for j in universe)
    for col in initial_columns or ():
        if col not in seen and col <= allowed:
            cols.append(col)
            seen.add(col)

    rounds = 0
    while True:
        res, c = _solve_restricted(v, cols, universe, x)
        q = float(res.dual_eq[0])
        p_univ = np.maximum(res.dual_ub, 0.0)
        if method == "enumerate":
            break
        rounds += 1
        prices = np.zeros(v.m)
        prices[universe] = p_univ
        hit = demand(v, prices, items=universe)
        gap = hit.utility - q
        if gap <= tol * max(1.0, abs(res.value)):
            break
        if hit.items in seen:
            # the dual already prices this column; residual gap is numerical
            if gap <= 1e-7 * max(1.0, abs(res.value)):
                break
            raise ConvergenceError("column generation stalled", gap)
        if rounds >= max_rounds:
            raise ConvergenceError("column generation round cap exceeded", gap)
        cols.append(hit.items)
        seen.add(hit.items)

    prices = np.zeros(v.m)
    prices[universe] = p_univ
    columns = [(cols[k], float(res.x[k])) for k in np.flatnonzero(res.x > 1e-12)]
    total = sum(w for _, w in columns)
    columns = [(s, w / total) for s, w in columns]
    value = float(res.value)
    dual_value = q + float(prices[universe] @ x[universe])
    if abs(value - dual_value) > 1e-6 * (1.0 + abs(value)):
        raise ConvergenceError("duality certificate failed", abs(value - dual_value))
    return ConcaveExtValue(value=value, q=q, prices=prices, columns=columns,
                           rounds=rounds, pool=list(cols))


@dataclass
class LogSupergradient:
    base: float
    grad: np.ndarray
    ext: ConcaveExtValue

    def linearization(self, y: np.ndarray, x: np.ndarray) -> float:
        return self.base + float(self.grad @ (y - x))


def supergradient_log(v: Valuation, x, items: Iterable[int] | None = None,
                      ext: ConcaveExtValue | None = None) -> LogSupergradient:
    """Supergradient of log v+ at x: grad = p / (q + p.x).

    The linearization touches log v+ at x and dominates it everywhere on
    the universe, including at the kinks where the dual is not unique.
    """
    x = np.asarray(x, dtype=float)
    if ext is None:
        ext = concave_ext(v, x, items=items)
    denom = ext.q + float(ext.prices @ x)
    if ext.value <= 0 or denom <= 0:
        raise ValueError("supergradient undefined where the extension is zero")
    return LogSupergradient(base=math.log(denom), grad=ext.prices / denom, ext=ext)


# ---------------------------------------------------------------------------
# Eisenberg-Gale relaxation


def default_epsilon(alpha: float, n_agents: int) -> float:
    """Interior floor that turns eps^4-approximate optima into the
    (1 + alpha) scaled-optimum contract."""
    return alpha / (2.0 + (1.0 + alpha) * n_agents)


@dataclass
class EgParams:
    alpha: float = 0.25
    epsilon: float | None = None
    max_iterations: int = 600
    step_scale: float = 0.4
    objective_tol: float = 1e-10
    patience: int = 80
    colgen_tol: float = 1e-9

    def floor(self, n_agents: int) -> float:
        eps = self.epsilon if self.epsilon is not None else default_epsilon(self.alpha, n_agents)
        if not 0 < eps * n_agents < 1:
            raise ValueError(f"interior floor {eps} infeasible for {n_agents} agents")
        return eps


@dataclass
class EgResult:
    agents: list[int]
    items: list[int]
    x: ItemFractional
    extensions: dict[int, ConcaveExtValue]
    objective: float
    gap: float
    epsilon: float
    iterations: int
    converged: bool
    trace: list[tuple[int, float, float, float]] = field(default_factory=list, repr=False)

    def values(self) -> dict[int, float]:
        return {i: self.extensions[i].value for i in self.agents}

    def trace_csv(self) -> str:
        """Diagnostics stream: iteration, objective, gap certificate, step."""
        lines = ["# schema=1", "iteration,objective,gap,step"]
        lines.extend(f"{t},{obj!r},{gap!r},{step!r}"
                     for t, obj, gap, step in self.trace)
        return "\n".join(lines) + "\n"

    def config(self):
        from .model import ConfigSolution

        return ConfigSolution({i: list(self.extensions[i].columns) for i in self.agents})


def _project_capped(col: np.ndarray, eps: float) -> np.ndarray:
    """Euclidean projection of one item's agent-masses onto
    {z >= eps, sum z <= 1}."""
    w = col - eps
    budget = 1.0 - eps * col.size
    w0 = np.maximum(w, 0.0)
    if w0.sum() <= budget + 1e-15:
        return w0 + eps
    u = np.sort(w)[::-1]
    css = np.cumsum(u) - budget
    rho = np.nonzero(u - css / np.arange(1, col.size + 1) > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(w - theta, 0.0) + eps


def solve_eg(inst: Instance, agents: Iterable[int], items: Iterable[int],
             params: EgParams | None = None) -> EgResult:
    """Maximize sum_i log v+_i(x_i) over the eps-floored capacity polytope.

    Projected supergradient ascent with steps step_scale/sqrt(t); the best
    iterate is tracked and returned with fresh dual certificates. Stops on
    a duality-gap certificate of eps^4 per agent (against the best vertex
    of the linearization), or when the objective stalls for `patience`
    accepted iterations.
    """
    params = params or EgParams()
    agent_list = sorted(set(agents))
    item_list = sorted(set(items))
    if not agent_list:
        raise ValueError("need at least one agent")
    n_a, m_i = len(agent_list), len(item_list)
    item_idx = np.array(item_list, dtype=np.int64)
    for i in agent_list:
        if inst.valuations[i].value(item_list) <= 0:
            raise ValueError(f"agent {i} derives no value from the item pool")

    eps = params.floor(n_a)
    gap_target = eps ** 4 * n_a
    x_mat = np.full((n_a, m_i), 1.0 / n_a)
    pools: dict[int, list[frozenset[int]]] = {i: [] for i in agent_list}

    def evaluate(mat):
        exts, grads, obj = {}, np.zeros_like(mat), 0.0
        for k, i in enumerate(agent_list):
            x_full = np.zeros(inst.m)
            x_full[item_idx] = mat[k]
            ext = concave_ext(inst.valuations[i], x_full, items=item_list,
                              tol=params.colgen_tol, initial_columns=pools[i])
            pools[i] = ext.pool
            sg = supergradient_log(inst.valuations[i], x_full, ext=ext)
            exts[i] = ext
            grads[k] = sg.grad[item_idx]
            obj += sg.base
        return exts, grads, obj

    best_obj, best_mat, best_exts = -np.inf, None, None
    gap = np.inf
    trace: list[tuple[int, float, float, float]] = []
    stale = 0
    iterations = 0
    converged = False
    for t in range(1, params.max_iterations + 1):
        iterations = t
        exts, grads, obj = evaluate(x_mat)
        if obj > best_obj + params.objective_tol:
            best_obj, best_mat, best_exts = obj, x_mat.copy(), exts
            stale = 0
        else:
            stale += 1
        vertex = np.full_like(x_mat, eps)
        winners = np.argmax(grads, axis=0)
        vertex[winners, np.arange(m_i)] += 1.0 - n_a * eps
        gap = float((grads * (vertex - x_mat)).sum())
        step = params.step_scale / math.sqrt(t)
        trace.append((t, obj, gap, step))
        if gap <= gap_target:
            converged = True
            if obj >= best_obj - params.objective_tol:
                best_obj, best_mat, best_exts = obj, x_mat.copy(), exts
            break
        if stale >= params.patience:
            break
        x_mat = x_mat + step * grads
        for j in range(m_i):
            x_mat[:, j] = _project_capped(x_mat[:, j], eps)

    if best_mat is None:  # pragma: no cover - first evaluate always records
        raise ConvergenceError("no iterate evaluated", gap)
    mass = {i: {int(j): float(best_mat[k, jj]) for jj, j in enumerate(item_list)}
            for k, i in enumerate(agent_list)}
    frac = ItemFractional(mass)
    frac.validate(inst.m)
    return EgResult(agents=agent_list, items=item_list, x=frac,
                    extensions=best_exts, objective=best_obj, gap=gap,
                    epsilon=eps, iterations=iterations, converged=converged,
                    trace=trace)


def scaled_optimum_check(inst: Instance, eg: EgResult, alpha: float,
                         tol: float = 1e-6) -> tuple[float, bool]:
    """Exact contract check: the scaled configuration-LP optimum against
    the solver's own targets must stay below (1 + alpha) * |agents|."""
    targets = eg.values()
    res = exact_config_lp(inst, objective="scaled", targets=targets,
                          agents=eg.agents, items=eg.items)
    ratio = res.optimum
    return ratio, ratio <= (1.0 + alpha) * len(eg.agents) + tol
