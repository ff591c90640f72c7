"""Graph model: Hamming distance, assignment enumeration, active factors."""

import itertools

import numpy as np
import pytest

from structura.constraints import ConstraintSet
from structura.errors import GraphStructureError, SizeBudgetError
from structura.graphs import (
    Assignment,
    FactorGraph,
    FactorType,
    Task,
    Variable,
    VarKind,
    active_factors,
    cartesian_assignments,
    enumerate_assignments,
    hamming_distance,
)

from conftest import make_essay, make_thread


def bare_graph(domains, graph_id="bare"):
    """Variables only, no factors; enough for enumeration tests."""
    variables = [
        Variable(i, VarKind.NODE_LABEL, tuple(range(d))) for i, d in enumerate(domains)
    ]
    return FactorGraph(
        id=graph_id,
        task=Task.STANCE,
        variables=variables,
        factors=[],
        groups=[0] * len(domains),
    )


class TestHammingDistance:
    def test_identical_assignments_have_zero_distance(self):
        a = Assignment([0, 1, 2])
        assert hamming_distance(a, a.copy()) == 0.0

    def test_all_positions_differing_normalized_is_one(self):
        a = Assignment([0, 0, 0])
        b = Assignment([1, 2, 1])
        assert hamming_distance(a, b, normalize=True) == 1.0

    def test_one_of_five_differing_normalized(self):
        a = Assignment([0, 0, 0, 0, 0])
        b = Assignment([1, 0, 0, 0, 0])
        assert hamming_distance(a, b, normalize=True) == pytest.approx(0.2)

    def test_mismatched_variable_sets_rejected(self):
        with pytest.raises(GraphStructureError):
            hamming_distance(Assignment([0, 1]), Assignment([0, 1, 0]))

    def test_position_mask_restricts_comparison(self):
        a = Assignment([0, 1, 0, 1])
        b = Assignment([1, 1, 1, 1])
        assert hamming_distance(a, b, positions=[1, 3]) == 0.0
        assert hamming_distance(a, b, positions=[0, 2]) == 2.0

    def test_metric_properties_on_random_triples(self, rng):
        for _ in range(200):
            n = int(rng.integers(1, 8))
            vals = [Assignment(rng.integers(0, 3, size=n)) for _ in range(3)]
            a, b, c = vals
            assert hamming_distance(a, b) == hamming_distance(b, a)
            assert (hamming_distance(a, b) == 0) == (a == b)
            assert hamming_distance(a, c) <= hamming_distance(a, b) + hamming_distance(
                b, c
            )
            norm = hamming_distance(a, b, normalize=True)
            assert 0.0 <= norm <= 1.0


class TestEnumerateAssignments:
    def test_single_binary_variable_yields_two(self):
        g = bare_graph([2])
        assert len(list(enumerate_assignments(g))) == 2

    def test_three_binary_variables_yield_eight(self):
        g = bare_graph([2, 2, 2])
        assert len(list(enumerate_assignments(g))) == 8

    def test_count_matches_domain_product(self, rng):
        for _ in range(20):
            domains = [int(d) for d in rng.integers(1, 4, size=int(rng.integers(1, 5)))]
            g = bare_graph(domains)
            expected = int(np.prod(domains))
            assert len(list(enumerate_assignments(g))) == expected

    def test_lexicographic_order(self):
        g = bare_graph([2, 3])
        seen = [a.as_tuple() for a in enumerate_assignments(g)]
        assert seen == sorted(seen)
        assert seen == list(itertools.product(range(2), range(3)))

    def test_cap_exceeded_names_graph(self):
        g = bare_graph([2] * 10, graph_id="too_big")
        with pytest.raises(SizeBudgetError, match="too_big"):
            enumerate_assignments(g, cap=100)

    def test_edge_consistency_filter_keeps_four_of_eight(self):
        # Two-post thread: 2 stance vars + 1 agreement var = 8 assignments.
        g, _ = make_thread(parents=(None, 0))
        cs = ConstraintSet.for_task(Task.STANCE)
        unfiltered = list(enumerate_assignments(g))
        assert len(unfiltered) == 8
        survivors = list(enumerate_assignments(g, cs))
        # Independent oracle: brute-force filter with the consistency rule.
        from structura.constraints import check

        expected = [a for a in unfiltered if not check(g, a, cs)]
        assert len(survivors) == 4
        assert [a.as_tuple() for a in survivors] == [a.as_tuple() for a in expected]

    def test_cartesian_matrix_matches_generator_order(self):
        g = bare_graph([2, 3, 2])
        matrix = cartesian_assignments(g)
        gen = [a.as_tuple() for a in enumerate_assignments(g)]
        assert [tuple(int(v) for v in row) for row in matrix] == gen


def _second_order_oracle(g, a):
    """Brute-force scan over ordered pairs of on-links.

    Grandparent fires for link pairs sharing head-to-tail (a->b, b->c);
    co-parent for pairs sharing the target (a->b, c->b).
    """
    meta = g.metadata
    on = [pair for pair in meta.pairs if a.values[meta.link_var[pair]] == 1]
    grandparents = set()
    coparents = set()
    for l1 in on:
        for l2 in on:
            if l1 == l2:
                continue
            if l1[1] == l2[0] and l1[0] != l2[1]:
                grandparents.add((meta.link_var[l1], meta.link_var[l2]))
            if l1[1] == l2[1] and l1[0] != l2[0]:
                coparents.add((meta.link_var[l1], meta.link_var[l2]))
    return grandparents, coparents


class TestActiveFactors:
    def test_no_links_means_no_second_order_activity(self):
        g, gold = make_essay(paragraph_sizes=(2,))
        values = gold.values.copy()
        meta = g.metadata
        for pair in meta.pairs:
            values[meta.link_var[pair]] = 0
        active = active_factors(g, Assignment(values))
        kinds = {g.factors[fid].ftype for fid, _ in active}
        assert FactorType.GRANDPARENT not in kinds
        assert FactorType.COPARENT not in kinds
        # Node, link, and link-label factors still score.
        assert {FactorType.NODE, FactorType.LINK, FactorType.STANCE} <= kinds

    def test_chain_activates_the_grandparent_factor(self):
        g, _ = make_essay(
            paragraph_sizes=(3,),
            links=((0, 1, "Support"), (1, 2, "Support")),
            gold_labels=["Premise", "Premise", "Claim"],
        )
        # The gold labeling violates constraints deliberately; activity only
        # depends on link indicators.
        meta = g.metadata
        values = np.zeros(g.num_variables, dtype=np.int16)
        values[meta.link_var[(0, 1)]] = 1
        values[meta.link_var[(1, 2)]] = 1
        a = Assignment(values)
        active = {fid for fid, _ in active_factors(g, a)}
        gp_expected, cp_expected = _second_order_oracle(g, a)
        gp_active = {
            g.factors[fid].scope
            for fid in active
            if g.factors[fid].ftype is FactorType.GRANDPARENT
        }
        cp_active = {
            g.factors[fid].scope
            for fid in active
            if g.factors[fid].ftype is FactorType.COPARENT
        }
        assert gp_active == gp_expected
        assert gp_active == {(meta.link_var[(0, 1)], meta.link_var[(1, 2)])}
        assert cp_active == cp_expected == set()

    def test_shared_target_activates_coparent_factors(self):
        g, _ = make_essay(paragraph_sizes=(3,))
        meta = g.metadata
        values = np.zeros(g.num_variables, dtype=np.int16)
        values[meta.link_var[(0, 1)]] = 1
        values[meta.link_var[(2, 1)]] = 1
        a = Assignment(values)
        gp_expected, cp_expected = _second_order_oracle(g, a)
        active = {fid for fid, _ in active_factors(g, a)}
        gp_active = {
            g.factors[fid].scope
            for fid in active
            if g.factors[fid].ftype is FactorType.GRANDPARENT
        }
        cp_active = {
            g.factors[fid].scope
            for fid in active
            if g.factors[fid].ftype is FactorType.COPARENT
        }
        assert gp_active == gp_expected == set()
        assert cp_active == cp_expected
        assert len(cp_active) == 2  # both orders of the shared-target pair

    def test_deterministic_and_pure(self, rng):
        g, gold = make_essay(paragraph_sizes=(3,), links=((0, 1, "Support"),))
        for _ in range(10):
            values = np.array(
                [
                    v.domain[int(rng.integers(len(v.domain)))]
                    for v in g.variables
                ],
                dtype=np.int16,
            )
            a = Assignment(values)
            first = active_factors(g, a)
            second = active_factors(g, a)
            assert first == second


class TestGraphValidation:
    def test_duplicate_factor_scope_rejected(self):
        from structura.graphs import Factor

        variables = [Variable(0, VarKind.NODE_LABEL, (0, 1))]
        factors = [
            Factor(0, FactorType.STANCE, (0,), np.zeros(3)),
            Factor(1, FactorType.STANCE, (0,), np.zeros(3)),
        ]
        with pytest.raises(GraphStructureError, match="duplicate factor"):
            FactorGraph(
                id="dup",
                task=Task.STANCE,
                variables=variables,
                factors=factors,
                groups=[0],
            )

    def test_factor_scope_must_reference_declared_variables(self):
        from structura.graphs import Factor

        variables = [Variable(0, VarKind.NODE_LABEL, (0, 1))]
        factors = [Factor(0, FactorType.STANCE, (3,), np.zeros(3))]
        with pytest.raises(GraphStructureError, match="unknown variable"):
            FactorGraph(
                id="dangling",
                task=Task.STANCE,
                variables=variables,
                factors=factors,
                groups=[0],
            )

    def test_reply_cycle_rejected(self):
        from conftest import thread_doc
        from structura.corpus import build_stance_graph
        from structura.errors import DataFormatError

        doc = thread_doc(parents=(1, 0))
        with pytest.raises((GraphStructureError, DataFormatError)):
            build_stance_graph(doc)

    def test_link_indicator_domain_enforced(self):
        with pytest.raises(GraphStructureError):
            Variable(0, VarKind.LINK_INDICATOR, (0, 1, 2))
