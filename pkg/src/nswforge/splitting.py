"""Set splitting: equalize support-set values before randomized rounding.

Both variants rewrite a per-agent distribution over item sets so that every
surviving support set is worth a constant fraction of the agent's target,
which is what keeps the value of a sampled set from collapsing for some
agents. The XOS variant reserves each source's largest clause item and
splits the rest; the subadditive variant splits and then trims overweight
parts. Every documented bound is asserted on every run: a violation means
the inputs were inconsistent (or a valuation is not actually subadditive)
and is raised as InvariantViolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .model import ConfigSolution, InvariantViolation
from .valuations import Valuation, xos_clause

_W_TOL = 1e-6   # tolerance on incoming per-agent weight sums
_B_TOL = 1e-9   # tolerance on the asserted output bounds


@dataclass(frozen=True)
class SplitColumn:
    items: frozenset[int]
    weight: float
    source: frozenset[int]
    large_item: int | None = None


@dataclass
class XosSplitOutput:
    columns: dict[int, list[SplitColumn]]
    v_plus: dict[int, float]

    def config(self) -> ConfigSolution:
        return ConfigSolution({i: [(c.items, c.weight) for c in cols]
                               for i, cols in self.columns.items()})


@dataclass
class SubaddSplitOutput:
    columns: dict[int, list[SplitColumn]]
    targets: dict[int, float]
    nu: dict[int, float]

    def config(self) -> ConfigSolution:
        return ConfigSolution({i: [(c.items, c.weight) for c in cols]
                               for i, cols in self.columns.items()})


def _check_weight_sum(agent: int, cols) -> None:
    total = sum(w for _, w in cols)
    if abs(total - 1.0) > _W_TOL:
        raise ValueError(f"agent {agent}: column weights sum to {total}, expected 1")


def _item_load(columns: Mapping[int, list[SplitColumn]]) -> dict[int, float]:
    load: dict[int, float] = {}
    for cols in columns.values():
        for col in cols:
            for j in col.items:
                load[j] = load.get(j, 0.0) + col.weight
    return load


def split_xos(config: ConfigSolution, valuations: Sequence[Valuation],
              v_plus: Mapping[int, float]) -> XosSplitOutput:
    """XOS set splitting against per-agent extension values v+.

    Sets below a quarter of v+ are discarded; each survivor S loses its
    largest clause item l, and S - l is split greedily (descending clause
    weight) into floor(4 v(S) / v+) parts whose clause value plus l clears
    the quarter threshold. Trailing parts may be empty: the reserved item
    alone can carry the threshold. Each part inherits 3/4 of the source
    weight.
    """
    out: dict[int, list[SplitColumn]] = {}
    for agent, cols in config.columns.items():
        _check_weight_sum(agent, cols)
        v = valuations[agent]
        target = v_plus[agent]
        if target <= 0:
            raise ValueError(f"agent {agent}: nonpositive extension value")
        threshold = target / 4.0
        parts_out: list[SplitColumn] = []
        for source, weight in cols:
            if weight <= 0:
                continue
            val = v.value(source)
            if val < threshold - _B_TOL:
                continue
            clause = xos_clause(v, source)
            order = sorted(source, key=lambda j: (-clause.weights[j], j))
            large = order[0]
            pieces = math.floor(4.0 * val / target + 1e-9)
            part_target = threshold - clause.weights[large]
            rest = order[1:]
            idx = 0
            parts: list[list[int]] = []
            for _ in range(pieces - 1):
                cur: list[int] = []
                cum = 0.0
                while idx < len(rest):
                    cur.append(rest[idx])
                    cum += clause.weights[rest[idx]]
                    idx += 1
                    if cum >= part_target - 1e-12:
                        break
                parts.append(cur)
            parts.append(list(rest[idx:]))
            for part in parts:
                items = frozenset(part)
                if v.value(items | {large}) < threshold - _B_TOL:
                    raise InvariantViolation(
                        f"agent {agent}: split part {sorted(items)} + {large} "
                        f"below the quarter threshold")
                parts_out.append(SplitColumn(items, 0.75 * weight, source, large))
        if not parts_out:
            raise InvariantViolation(
                f"agent {agent}: no set cleared the quarter threshold; "
                f"weights and v+ are inconsistent")
        out[agent] = parts_out

    for agent, cols in out.items():
        total = sum(c.weight for c in cols)
        if not 1.0 - _B_TOL <= total <= 3.0 + _B_TOL:
            raise InvariantViolation(
                f"agent {agent}: split mass {total} outside [1, 3]")
        for col in cols:
            if col.large_item in col.items:
                raise InvariantViolation("reserved item leaked into a part")
    load = _item_load(out)
    for j, mass in load.items():
        if mass > 0.75 + _B_TOL:
            raise InvariantViolation(f"item {j}: split load {mass} exceeds 3/4")
    return XosSplitOutput(columns=out, v_plus=dict(v_plus))


def _trim(part: list[int], v: Valuation, cap: float) -> list[int]:
    """Drop lowest-singleton-value items while the part is worth more than cap."""
    singles = v.singleton_values()
    part = sorted(part, key=lambda j: (singles[j], j))
    while part and v.value(part) > cap + _B_TOL:
        part.pop(0)
    return sorted(part)


def split_subadditive(config: ConfigSolution, valuations: Sequence[Valuation],
                      targets: Mapping[int, float],
                      nu: Mapping[int, float]) -> SubaddSplitOutput:
    """Subadditive set splitting against per-agent targets V.

    Only agents with V >= 6 nu may participate. Sets below V/3 are
    discarded; survivors are split greedily in item order into
    floor(3 v(S) / V) nonempty parts worth at least V/3 - nu, then each
    part is trimmed down to value at most V. Accumulated weights are
    renormalized to sum to exactly one per agent, which cannot increase
    any item's load because the pre-normalization mass is at least one.
    """
    out: dict[int, list[SplitColumn]] = {}
    for agent, cols in config.columns.items():
        _check_weight_sum(agent, cols)
        v = valuations[agent]
        target = float(targets[agent])
        single_cap = float(nu[agent])
        if target <= 0:
            raise ValueError(f"agent {agent}: nonpositive target")
        if target < 6.0 * single_cap - _B_TOL:
            raise ValueError(
                f"agent {agent}: target {target} below 6 nu = {6 * single_cap}; "
                f"filter such agents out before splitting")
        keep_threshold = target / 3.0
        part_target = target / 3.0 - single_cap
        raw: list[SplitColumn] = []
        for source, weight in cols:
            if weight <= 0:
                continue
            val = v.value(source)
            if val < keep_threshold - _B_TOL:
                continue
            pieces = math.floor(3.0 * val / target + 1e-9)
            order = sorted(source)
            idx = 0
            parts: list[list[int]] = []
            for _ in range(pieces - 1):
                cur: list[int] = []
                while idx < len(order):
                    cur.append(order[idx])
                    idx += 1
                    if v.value(cur) >= part_target - 1e-12:
                        break
                parts.append(cur)
            parts.append(list(order[idx:]))
            for part in parts:
                if not part or v.value(part) < part_target - _B_TOL:
                    raise InvariantViolation(
                        f"agent {agent}: greedy split of {sorted(source)} "
                        f"failed; valuation is not subadditive?")
                part = _trim(part, v, target)
                val_part = v.value(part)
                if not part_target - _B_TOL <= val_part <= target + _B_TOL:
                    raise InvariantViolation(
                        f"agent {agent}: trimmed part {part} worth {val_part} "
                        f"outside [{part_target}, {target}]")
                raw.append(SplitColumn(frozenset(part), weight, source, None))
        mass = sum(c.weight for c in raw)
        if mass < 1.0 - _B_TOL:
            raise InvariantViolation(
                f"agent {agent}: pre-normalization mass {mass} below 1; "
                f"weights and targets are inconsistent")
        out[agent] = [SplitColumn(c.items, c.weight / mass, c.source, None)
                      for c in raw]

    load = _item_load(out)
    for j, item_mass in load.items():
        if item_mass > 1.0 + _B_TOL:
            raise InvariantViolation(f"item {j}: split load {item_mass} exceeds 1")
    for agent, cols in out.items():
        total = sum(c.weight for c in cols)
        if abs(total - 1.0) > _B_TOL:
            raise InvariantViolation(f"agent {agent}: normalized mass {total} != 1")
    return SubaddSplitOutput(columns=out, targets=dict(targets), nu=dict(nu))
