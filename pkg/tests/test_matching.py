"""Product matchings, the initial reservation step, and rematching."""

import itertools
import math

import numpy as np
import pytest

from nswforge.matching import (
    MatchingProblem,
    extension_pi,
    initial_matching,
    matching_objective,
    product_matching,
    rematch_rho,
)
from nswforge.model import Instance, Matching
from nswforge.oracle import exact_nsw, exact_scaled_welfare
from nswforge.valuations import Additive, Xos


def make_instance(*valuations):
    m = valuations[0].m
    return Instance(tuple(f"agent{i}" for i in range(len(valuations))),
                    tuple(f"item{j}" for j in range(m)), tuple(valuations))


def brute_force_best(scores):
    """Lexicographic (positive count, log-sum) over all injective maps."""
    n, m = scores.shape
    best = (-1, -math.inf)
    for perm in itertools.permutations(range(m), n):
        count = sum(1 for i in range(n) if scores[i, perm[i]] > 0)
        logsum = sum(math.log(scores[i, perm[i]]) for i in range(n)
                     if scores[i, perm[i]] > 0)
        best = max(best, (count, logsum))
    return best


class TestProductMatching:
    def test_two_agent_example(self):
        scores = np.array([[3.0, 1.0], [2.0, 2.0]])
        matching = product_matching(MatchingProblem(scores))
        assert matching.assignment == {0: 0, 1: 1}
        product = math.prod(scores[i, j] for i, j in matching.assignment.items())
        assert product == 6.0

    def test_single_agent_prefers_positive(self):
        matching = product_matching(np.array([[0.0, 5.0]]))
        assert matching.assignment == {0: 1}

    def test_symmetric_scores_reach_same_objective(self):
        scores = np.full((3, 3), 2.0)
        matching = product_matching(scores)
        assert matching_objective(scores, matching) == (3, pytest.approx(3 * math.log(2)))

    def test_requires_enough_items(self):
        with pytest.raises(ValueError, match="fewer items"):
            product_matching(np.ones((3, 2)))

    @pytest.mark.parametrize("seed", range(30))
    def test_optimal_against_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        n = 5 if seed == 0 else int(rng.integers(1, 6))
        m = n + int(rng.integers(0, 3))
        scores = rng.uniform(0, 1, (n, m))
        scores[rng.uniform(size=scores.shape) < 0.3] = 0.0
        matching = product_matching(scores)
        matching.validate()
        count, logsum = matching_objective(scores, matching)
        ref_count, ref_logsum = brute_force_best(scores)
        assert count == ref_count
        assert logsum == pytest.approx(ref_logsum, abs=1e-9)


class TestInitialMatching:
    def test_two_agents_three_items(self):
        inst = make_instance(Additive([5, 1, 1]), Additive([1, 5, 1]))
        tau, matched, remaining, active = initial_matching(inst)
        assert tau.assignment == {0: 0, 1: 1}
        assert remaining == frozenset({2})
        assert active == frozenset({0, 1})

    def test_agent_with_single_interest(self):
        inst = make_instance(Additive([7, 0, 0]))
        tau, matched, remaining, active = initial_matching(inst)
        assert matched == frozenset({0})
        assert remaining == frozenset({1, 2})
        assert active == frozenset()

    def test_identical_agents_match_everyone(self):
        inst = make_instance(Additive([1, 1, 1]), Additive([1, 1, 1]), Additive([1, 1, 1]))
        _, matched, _, _ = initial_matching(inst)
        assert len(matched) == 3


class TestRematchRho:
    def test_all_agents_covered_is_trivial(self):
        inst = make_instance(Additive([3, 1]), Additive([1, 3]))
        tau, *_ = initial_matching(inst)
        rho = rematch_rho(tau, tau, big_w=[10.0, 10.0], nu=[0.0, 0.0], inst=inst)
        rho.validate()
        assert set(rho.assignment) == {0, 1}

    def test_chain_pulls_agent_to_tau(self):
        # agent 0 wants its nu-item; agent 1's pi-item is agent 0's tau-item,
        # so agent 1 must follow the chain back to its own tau-item.
        inst = make_instance(Additive([4, 1, 2]), Additive([2, 3, 0]))
        tau, *_ = initial_matching(inst)
        assert tau.assignment == {0: 0, 1: 1}
        pi = Matching({0: 1, 1: 0})
        nu = [3.0, 0.0]  # agent 0: nu beats v_0(pi(0)) = 1
        rho = rematch_rho(tau, pi, big_w=[0.0, 0.0], nu=nu, inst=inst)
        assert rho.assignment == {0: 0, 1: 1}

    def test_pi_equal_tau(self):
        inst = make_instance(Additive([4, 1, 1, 1]), Additive([1, 4, 1, 1]),
                             Additive([1, 1, 4, 1]))
        tau, _, remaining, _ = initial_matching(inst)
        nu = [max(inst.valuations[i].value((j,)) for j in remaining)
              for i in inst.agents]
        rho = rematch_rho(tau, tau, big_w=[0.0, 0.0, 0.0], nu=nu, inst=inst)
        rho.validate()
        # guarantee vs brute force over every matching into the reserved items
        target = math.prod(max(0.0, inst.valuations[i].value((tau.assignment[i],)), nu[i])
                           for i in inst.agents)
        achieved = math.prod(max(0.0, inst.valuations[i].value((rho.assignment[i],)))
                             for i in inst.agents)
        assert achieved >= target * (1 - 1e-9)

    def test_requires_pi_into_reserved_items(self):
        inst = make_instance(Additive([3, 1, 1]), Additive([1, 3, 1]))
        tau, *_ = initial_matching(inst)
        with pytest.raises(ValueError, match="pi must map"):
            rematch_rho(tau, Matching({0: 2, 1: 1}), [0, 0], [0, 0], inst)

    @pytest.mark.parametrize("seed", range(60))
    def test_fuzzed_product_guarantee(self, seed):
        rng = np.random.default_rng(10_000 + seed)
        n = int(rng.integers(2, 5))
        m = n + int(rng.integers(1, 4))
        vals = [Additive(rng.uniform(0, 1, m)) if rng.random() < 0.5
                else Xos(rng.uniform(0, 1, (3, m))) for _ in range(n)]
        inst = make_instance(*vals)
        tau, matched, remaining, _ = initial_matching(inst)
        items = sorted(matched)
        pi = Matching({i: items[k] for k, i in enumerate(rng.permutation(n))})
        big_w = rng.uniform(0, 1, n)
        nu = np.array([rng.uniform(0, 1) *
                       max((inst.valuations[i].value((j,)) for j in remaining), default=0.0)
                       for i in inst.agents])
        rho = rematch_rho(tau, pi, big_w, nu, inst)  # raises on violation
        rho.validate()


class TestExtensionPi:
    def test_keeps_best_reserved_item(self):
        inst = make_instance(Additive([5, 2, 1, 1]), Additive([1, 1, 5, 2]))
        tau, matched, _, _ = initial_matching(inst)
        assert matched == {0, 2}
        best = exact_nsw(inst).witness
        pi = extension_pi(best, [1.0, 1.0], tau, inst)
        pi.validate()
        for i in inst.agents:
            held = best.bundle(i) & matched
            if held:
                assert pi.assignment[i] in held

    @pytest.mark.parametrize("seed", range(15))
    def test_certifies_extension_bound(self, seed):
        # product of (V_i + matched value) covers OPT within the contract
        # constant from the exact scaled-welfare oracle, plus one.
        rng = np.random.default_rng(20_000 + seed)
        n, m = 2, 4
        inst = make_instance(*[Additive(rng.uniform(0.1, 1, m)) for _ in range(n)])
        tau, matched, remaining, active = initial_matching(inst)
        if not active:
            return
        targets = {i: inst.valuations[i].value(remaining) * rng.uniform(0.5, 1.0)
                   for i in active}
        contract = exact_scaled_welfare(inst, targets, agents=active,
                                        items=remaining).optimum / len(active)
        exact = exact_nsw(inst)
        pi = extension_pi(exact.witness, targets, tau, inst)
        lhs = math.prod(targets.get(i, 0.0) + inst.valuations[i].value((pi.assignment[i],))
                        for i in inst.agents) ** (1 / n)
        assert lhs >= exact.optimum / (contract + 1) - 1e-9
