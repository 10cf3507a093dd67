"""Brute-force exact solvers used as ground truth by the verification suite.

These are deliberately simple: full mixed-radix enumeration for integral
optima and an explicitly enumerated column LP for the fractional one.
Enumeration caps are hard errors, never silent truncation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ._lp import maximize
from .model import Allocation, ConfigSolution, Instance
from .valuations import CapExceeded

NSW_ENUM_CAP = 10**7
CONFIG_LP_CAP = 10**6


@dataclass
class ExactResult:
    optimum: float
    witness: Allocation | ConfigSolution
    nodes: int


def _item_list(inst: Instance, items: Iterable[int] | None) -> list[int]:
    return sorted(inst.items if items is None else set(items))


def _value_tables(inst: Instance, agents: Sequence[int],
                  items: Sequence[int]) -> list[np.ndarray]:
    """Per-agent value of every subset of `items`, indexed by local mask."""
    k = len(items)
    masks = np.arange(1 << k, dtype=np.int64)
    rows = np.zeros((1 << k, inst.m), dtype=bool)
    for pos, j in enumerate(items):
        rows[:, j] = ((masks >> pos) & 1).astype(bool)
    return [inst.valuations[i].value_rows(rows) for i in agents]


def _enumerate_assignments(n_agents: int, k_items: int, leaf):
    """DFS over all agent assignments of k items, lowest counter first.

    `leaf(masks)` is called once per assignment with per-agent local masks.
    """
    masks = [0] * n_agents

    def rec(t: int):
        if t == k_items:
            leaf(masks)
            return
        bit = 1 << t
        for a in range(n_agents):
            masks[a] |= bit
            rec(t + 1)
            masks[a] ^= bit

    rec(0)


def exact_nsw(inst: Instance, items: Iterable[int] | None = None,
              cap: int = NSW_ENUM_CAP) -> ExactResult:
    """Maximum NSW over all assignments of `items` (default: all items)."""
    item_list = _item_list(inst, items)
    n, k = inst.n, len(item_list)
    if n ** k > cap:
        raise CapExceeded(f"{n}^{k} assignments exceed the cap of {cap}")
    tables = _value_tables(inst, list(inst.agents), item_list)

    best = {"product": -1.0, "masks": None}

    def leaf(masks):
        prod = 1.0
        for i in range(n):
            prod *= tables[i][masks[i]]
            if prod <= 0.0:
                prod = 0.0
                break
        if prod > best["product"]:
            best["product"] = prod
            best["masks"] = list(masks)

    _enumerate_assignments(n, k, leaf)
    bundles = {
        i: frozenset(item_list[t] for t in range(k) if best["masks"][i] >> t & 1)
        for i in range(n)
    }
    witness = Allocation(bundles)
    witness.validate(inst)
    optimum = best["product"] ** (1.0 / n) if best["product"] > 0 else 0.0
    return ExactResult(optimum=float(optimum), witness=witness, nodes=n ** k)


def exact_scaled_welfare(inst: Instance, targets, agents: Iterable[int] | None = None,
                         items: Iterable[int] | None = None,
                         cap: int = NSW_ENUM_CAP) -> ExactResult:
    """max over allocations of sum_i v_i(T_i) / V_i, integral witness."""
    agent_list = sorted(inst.agents if agents is None else set(agents))
    item_list = _item_list(inst, items)
    targets = {i: float(targets[i]) for i in agent_list}
    for i, v in targets.items():
        if v <= 0:
            raise ValueError(f"target for agent {i} must be positive")
    n, k = len(agent_list), len(item_list)
    if n ** k > cap:
        raise CapExceeded(f"{n}^{k} assignments exceed the cap of {cap}")
    tables = _value_tables(inst, agent_list, item_list)
    scale = np.array([1.0 / targets[i] for i in agent_list])

    best = {"welfare": -1.0, "masks": None}

    def leaf(masks):
        welfare = sum(tables[i][masks[i]] * scale[i] for i in range(n))
        if welfare > best["welfare"]:
            best["welfare"] = welfare
            best["masks"] = list(masks)

    _enumerate_assignments(n, k, leaf)
    bundles = {
        agent_list[i]: frozenset(item_list[t] for t in range(k)
                                 if best["masks"][i] >> t & 1)
        for i in range(n)
    }
    witness = Allocation(bundles)
    witness.validate(inst)
    return ExactResult(optimum=float(best["welfare"]), witness=witness, nodes=n ** k)


def exact_config_lp(inst: Instance, objective: str = "welfare", targets=None,
                    agents: Iterable[int] | None = None,
                    items: Iterable[int] | None = None,
                    cap: int = CONFIG_LP_CAP) -> ExactResult:
    """Full configuration LP by explicit column enumeration.

    Columns are all (agent, subset) pairs over `items`, with unit per-agent
    mass and unit per-item capacity. `objective="scaled"` divides each
    agent's values by its target, which yields the exact contract constant
    for the relaxation-solver check.
    """
    if objective not in ("welfare", "scaled"):
        raise ValueError(f"unknown objective {objective!r}")
    agent_list = sorted(inst.agents if agents is None else set(agents))
    item_list = _item_list(inst, items)
    n, k = len(agent_list), len(item_list)
    n_cols = n << k
    if n_cols > cap:
        raise CapExceeded(f"{n_cols} LP columns exceed the cap of {cap}")
    tables = _value_tables(inst, agent_list, item_list)

    c = np.empty(n_cols)
    for pos, i in enumerate(agent_list):
        vals = tables[pos]
        if objective == "scaled":
            t = float(targets[i])
            if t <= 0:
                raise ValueError(f"target for agent {i} must be positive")
            vals = vals / t
        c[pos << k:(pos + 1) << k] = vals

    local_masks = np.arange(1 << k, dtype=np.int64)
    a_ub = np.zeros((k, n_cols))
    for t in range(k):
        contains = ((local_masks >> t) & 1).astype(float)
        a_ub[t] = np.tile(contains, n)
    a_eq = np.zeros((n, n_cols))
    for pos in range(n):
        a_eq[pos, pos << k:(pos + 1) << k] = 1.0
    res = maximize(c, a_ub=a_ub, b_ub=np.ones(k), a_eq=a_eq, b_eq=np.ones(n))

    columns: dict[int, list[tuple[frozenset[int], float]]] = {i: [] for i in agent_list}
    for idx in np.flatnonzero(res.x > 1e-12):
        pos, mask = divmod(int(idx), 1 << k)
        subset = frozenset(item_list[t] for t in range(k) if mask >> t & 1)
        columns[agent_list[pos]].append((subset, float(res.x[idx])))
    witness = ConfigSolution(columns)
    return ExactResult(optimum=float(res.value), witness=witness, nodes=n_cols)
