"""Randomized rounding: contention resolution, iterated rounding, procedures.

All randomness flows through `RngStream`, which derives one independent
substream per (purpose, entity) pair. Sampling an item's round or an
agent's tentative set therefore never depends on iteration order, and an
identical seed reproduces every outcome bit for bit.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .model import Allocation, Instance, InvariantViolation
from .splitting import SubaddSplitOutput, XosSplitOutput
from .valuations import CapExceeded, Valuation

# substream purposes
_ITEM_ROUNDS = 0
_TENTATIVE = 1
_WINNERS = 2
STREAM_GENERATE = 3
STREAM_TRIALS = 4

ORACLE_CHOICE_CAP = 10**6
ORACLE_NODE_CAP = 10**7


class RngStream:
    """Seeded random streams with deterministic substream derivation.

    Substreams are PCG64 generators keyed by SeedSequence(seed, spawn_key),
    where the spawn key is the integer path passed in. The same (seed,
    path) pair yields the same bit stream on every platform.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & (2**64 - 1)

    def substream(self, *path: int) -> np.random.Generator:
        return np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=tuple(path))))

    def uniform(self, *path: int) -> float:
        return float(self.substream(*path).random())


#: signature of a pluggable rounding procedure: given per-agent columns
#: (weights summing to at most one each), valuations, scaled targets and a
#: stream, return one set per agent, each a subset of a support column.
RoundingProcedure = Callable[
    [dict[int, list[tuple[frozenset[int], float]]], Sequence[Valuation],
     Mapping[int, float], RngStream, int],
    dict[int, frozenset[int]],
]


@dataclass
class RoundStats:
    index: int
    active: int
    scaled_welfare: float
    exited: tuple[int, ...]


@dataclass
class RoundOutcome:
    allocation: Allocation
    tentative: dict[int, frozenset[int]]
    contention: dict[int, tuple[int, ...]]
    large_items: dict[int, int] = field(default_factory=dict)
    normalizers: dict[int, float] = field(default_factory=dict)
    exit_rounds: dict[int, int] = field(default_factory=dict)
    item_rounds: dict[int, int] = field(default_factory=dict)
    round_log: list[RoundStats] = field(default_factory=list)
    rounds_capped: bool = False

    def to_json(self) -> str:
        doc = {
            "bundles": {str(i): sorted(s) for i, s in sorted(self.allocation.bundles.items())},
            "tentative": {str(i): sorted(s) for i, s in sorted(self.tentative.items())},
            "contention": {str(j): list(a) for j, a in sorted(self.contention.items())},
            "large_items": {str(i): j for i, j in sorted(self.large_items.items())},
            "normalizers": {str(i): c for i, c in sorted(self.normalizers.items())},
            "exit_rounds": {str(i): t for i, t in sorted(self.exit_rounds.items())},
            "item_rounds": {str(j): t for j, t in sorted(self.item_rounds.items())},
            "round_log": [[r.index, r.active, r.scaled_welfare, list(r.exited)]
                          for r in self.round_log],
            "rounds_capped": self.rounds_capped,
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def _pick_index(weights: Sequence[float], u: float) -> int:
    """Inverse-CDF draw over normalized weights."""
    acc = 0.0
    for k, w in enumerate(weights):
        acc += w
        if u < acc:
            return k
    return len(weights) - 1


def _resolve_contention(tentative: dict[int, frozenset[int]], rng: RngStream,
                        *prefix: int) -> tuple[dict[int, tuple[int, ...]], dict[int, set[int]]]:
    """Assign each requested item uniformly among its requesting agents."""
    requests: dict[int, list[int]] = {}
    for agent in sorted(tentative):
        for j in tentative[agent]:
            requests.setdefault(j, []).append(agent)
    won: dict[int, set[int]] = {i: set() for i in tentative}
    contention: dict[int, tuple[int, ...]] = {}
    for j in sorted(requests):
        agents = sorted(requests[j])
        contention[j] = tuple(agents)
        u = rng.uniform(*prefix, _WINNERS, j)
        won[agents[min(int(u * len(agents)), len(agents) - 1)]].add(j)
    return contention, won


def round_xos(split: XosSplitOutput, valuations: Sequence[Valuation],
              rng: RngStream) -> RoundOutcome:
    """One-shot contention-resolution rounding of an XOS split solution.

    Each agent samples a tentative part with probability proportional to
    its split weight (the normalizer c_i lands in [1/3, 1]); every
    requested item then goes to a uniformly random requester.
    """
    tentative_cols = {}
    normalizers = {}
    for agent in sorted(split.columns):
        cols = split.columns[agent]
        total = sum(c.weight for c in cols)
        if not 1.0 - 1e-9 <= total <= 3.0 + 1e-9:
            raise InvariantViolation(
                f"agent {agent}: split mass {total} outside [1, 3]")
        normalizers[agent] = 1.0 / total
        probs = [c.weight / total for c in cols]
        u = rng.uniform(_TENTATIVE, agent)
        tentative_cols[agent] = cols[_pick_index(probs, u)]
    tentative = {i: col.items for i, col in tentative_cols.items()}
    contention, won = _resolve_contention(tentative, rng)
    bundles = {i: frozenset(won[i]) for i in tentative}
    for i, col in tentative_cols.items():
        if not bundles[i] <= col.items:
            raise InvariantViolation("an agent won an item it never requested")
    return RoundOutcome(
        allocation=Allocation(bundles),
        tentative=tentative,
        contention=contention,
        large_items={i: col.large_item for i, col in tentative_cols.items()},
        normalizers=normalizers,
    )


def cr_procedure(columns: dict[int, list[tuple[frozenset[int], float]]],
                 valuations: Sequence[Valuation], targets: Mapping[int, float],
                 rng: RngStream, round_index: int = 1) -> dict[int, frozenset[int]]:
    """Contention-resolution rounding procedure (nominal welfare factor 4).

    Samples one tentative support set per agent and resolves every
    contested item uniformly among the requesters.
    """
    del targets
    tentative = {}
    for agent in sorted(columns):
        cols = columns[agent]
        total = sum(w for _, w in cols)
        probs = [w / total for _, w in cols]
        u = rng.uniform(_TENTATIVE, round_index, agent)
        tentative[agent] = cols[_pick_index(probs, u)][0]
    _, won = _resolve_contention(tentative, rng, round_index)
    return {i: frozenset(won[i]) for i in tentative}


def oracle_procedure(columns: dict[int, list[tuple[frozenset[int], float]]],
                     valuations: Sequence[Valuation], targets: Mapping[int, float],
                     rng: RngStream | None = None, round_index: int = 1,
                     ) -> dict[int, frozenset[int]]:
    """Exhaustive scaled-welfare-maximizing rounding procedure.

    Tries every choice of one support set per agent and, for each choice,
    every way of awarding each contested item to one of its requesters;
    returns the combination maximizing sum_i v_i(S_i) / V_i. Deterministic:
    the first maximizer in enumeration order wins.
    """
    del rng, round_index
    agents = sorted(columns)
    supports = [sorted({s for s, _ in columns[i]}, key=lambda s: tuple(sorted(s)))
                for i in agents]
    n_choices = math.prod(len(s) for s in supports)
    if n_choices > ORACLE_CHOICE_CAP:
        raise CapExceeded(f"{n_choices} support combinations exceed the cap")

    memo: dict[tuple[int, frozenset[int]], float] = {}

    def scaled(agent: int, items: frozenset[int]) -> float:
        key = (agent, items)
        if key not in memo:
            memo[key] = valuations[agent].value(items) / targets[agent]
        return memo[key]

    best_welfare = -1.0
    best: dict[int, frozenset[int]] | None = None
    nodes = 0
    for profile in itertools.product(*supports):
        holders: dict[int, list[int]] = {}
        for pos, chosen in enumerate(profile):
            for j in chosen:
                holders.setdefault(j, []).append(pos)
        contested = sorted(j for j, who in holders.items() if len(who) > 1)
        combos = math.prod(len(holders[j]) for j in contested)
        nodes += max(combos, 1)
        if nodes > ORACLE_NODE_CAP:
            raise CapExceeded("winner enumeration exceeded the node cap")
        for winners in itertools.product(*(holders[j] for j in contested)):
            lost: list[set[int]] = [set() for _ in agents]
            for j, winner in zip(contested, winners):
                for pos in holders[j]:
                    if pos != winner:
                        lost[pos].add(j)
            welfare = 0.0
            resolved = {}
            for pos, agent in enumerate(agents):
                items = profile[pos] - frozenset(lost[pos])
                resolved[agent] = items
                welfare += scaled(agent, items)
            if welfare > best_welfare + 1e-15:
                best_welfare = welfare
                best = resolved
    assert best is not None
    return best


def measured_welfare_factor(split: SubaddSplitOutput, valuations: Sequence[Valuation],
                            proc: RoundingProcedure, rng: RngStream,
                            subset_cap: int = 12) -> float:
    """Measured d of a rounding procedure on a split solution.

    The iterated-rounding analysis needs the welfare guarantee on every
    subset of agents it may recurse on, so d is the worst |B| / welfare(B)
    over all nonempty agent subsets B. Beyond `subset_cap` agents only the
    full set is measured and a 1.25 safety factor is applied instead.
    """
    agents = sorted(split.columns)
    if not agents:
        return 1.0
    targets = scaled_targets(split, valuations)

    def factor(group: tuple[int, ...]) -> float:
        columns = {i: [(c.items, c.weight) for c in split.columns[i]] for i in group}
        sets = proc(columns, valuations, targets, rng, 0)
        welfare = sum(valuations[i].value(sets[i]) / targets[i] for i in group)
        if welfare <= 0:
            raise InvariantViolation("rounding procedure produced zero scaled welfare")
        return len(group) / welfare

    if len(agents) > subset_cap:
        return 1.25 * factor(tuple(agents))
    worst = 0.0
    for size in range(1, len(agents) + 1):
        for group in itertools.combinations(agents, size):
            worst = max(worst, factor(group))
    return worst


def scaled_targets(split: SubaddSplitOutput,
                   valuations: Sequence[Valuation]) -> dict[int, float]:
    """V'_i: each agent's expected value under the split distribution."""
    return {i: sum(valuations[i].value(c.items) * c.weight for c in cols)
            for i, cols in split.columns.items()}


def geometric_round(u: float, delta: float) -> int:
    """Inverse-CDF geometric draw: P(t) = delta * (1 - delta)^(t-1)."""
    w = 1.0 - u
    if w >= 1.0:
        return 1
    return max(1, math.ceil(math.log(w) / math.log(1.0 - delta)))


def iterated_round(split: SubaddSplitOutput, valuations: Sequence[Valuation],
                   items: Sequence[int], delta: float, proc: RoundingProcedure,
                   rng: RngStream, extra_rounds: int = 10) -> RoundOutcome:
    """Iterated rounding: satisfied agents keep a geometric slice of items.

    Every item independently draws the round r_j in which it is handed
    out. Each round runs the rounding procedure on the remaining agents;
    agents whose set reaches delta times their target exit with the items
    of their set that drew the current round. The loop is capped at the
    expected depth plus `extra_rounds`; hitting the cap marks the outcome
    (it indicates the procedure is not meeting its welfare contract) and
    leaves the stragglers with empty sets.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    targets = scaled_targets(split, valuations)
    agents0 = sorted(split.columns)
    item_rounds = {int(j): geometric_round(rng.uniform(_ITEM_ROUNDS, int(j)), delta)
                   for j in items}

    n0 = max(len(agents0), 1)
    cap = max(1, math.ceil(math.log(max(n0, 2)) / -math.log1p(-delta))) + extra_rounds
    active = list(agents0)
    bundles: dict[int, frozenset[int]] = {}
    tentative: dict[int, frozenset[int]] = {}
    exit_rounds: dict[int, int] = {}
    log: list[RoundStats] = []
    for t in range(1, cap + 1):
        if not active:
            break
        columns = {i: [(c.items, c.weight) for c in split.columns[i]] for i in active}
        sets = proc(columns, valuations, targets, rng, t)
        welfare = sum(valuations[i].value(sets[i]) / targets[i] for i in active)
        slice_t = frozenset(j for j, r in item_rounds.items() if r == t)
        exited = []
        for i in active:
            tentative[i] = sets[i]
            if valuations[i].value(sets[i]) >= delta * targets[i] - 1e-12:
                bundles[i] = sets[i] & slice_t
                exit_rounds[i] = t
                exited.append(i)
        log.append(RoundStats(t, len(active), welfare, tuple(exited)))
        active = [i for i in active if i not in exit_rounds]
    capped = bool(active)
    for i in active:
        bundles[i] = frozenset()
    return RoundOutcome(
        allocation=Allocation(bundles),
        tentative=tentative,
        contention={},
        exit_rounds=exit_rounds,
        item_rounds=item_rounds,
        round_log=log,
        rounds_capped=capped,
    )


def final_matching(bundles: Mapping[int, frozenset[int]], inst: Instance,
                   reserved: frozenset[int]):
    """Product-optimal assignment of the reserved items on top of bundles."""
    from .matching import product_matching

    reserved_list = sorted(reserved)
    scores = np.zeros((inst.n, len(reserved_list)))
    for i in inst.agents:
        base = bundles.get(i, frozenset())
        for k, h in enumerate(reserved_list):
            scores[i, k] = inst.valuations[i].value(base | {h})
    local = product_matching(scores)
    sigma_map = {i: reserved_list[k] for i, k in local.assignment.items()}
    from .model import Matching

    sigma = Matching(sigma_map)
    sigma.validate()
    out = Allocation({i: bundles.get(i, frozenset()) | {sigma_map[i]}
                      for i in inst.agents})
    out.validate(inst)
    return out, sigma


def finalize_xos(outcome: RoundOutcome, inst: Instance,
                 reserved: frozenset[int]):
    """Rematch the reserved items on top of the rounded bundles."""
    bundles = {i: outcome.allocation.bundle(i) for i in inst.agents}
    return final_matching(bundles, inst, reserved)
