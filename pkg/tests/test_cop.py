import json
import math
from fractions import Fraction

import numpy as np
import pytest

from oracles import brute_force_objective, random_geometric_instance, random_table_instance
from radarnet.cop import (
    Allocation,
    ContractError,
    CopInstance,
    EmptyInstance,
    build_instance,
    instance_from_jsonable,
    instance_to_jsonable,
    objective,
    pair_utility,
    solve_exact,
    validate,
)
from radarnet.geometry import Cov2, CovEllipse, Vec2, circle_lens_area, ellipse_area
from radarnet.tracking import RadarConfig


def tiny_instance(c=0.7, gamma=Fraction(1, 5), budget=Fraction(1)):
    return CopInstance((1,), (1,), {(1, 1, 1): c}, {(1, 1): gamma}, {1: budget})


class TestPairUtility:
    A_REF = 1000.0

    def test_vanishing_area_saturates_at_one(self):
        e = CovEllipse(Vec2(0, 0), Cov2(1e-6, 0, 0, 1e-6))
        assert pair_utility(e, None, self.A_REF) == pytest.approx(1.0, abs=1e-6)

    def test_identical_ellipses_give_no_pairing_gain(self):
        e = CovEllipse(Vec2(5, 5), Cov2(40.0, 10.0, 10.0, 30.0))
        assert pair_utility(e, e, self.A_REF) == pair_utility(e, None, self.A_REF)

    def test_half_utility_when_area_equals_reference(self):
        r = math.sqrt(self.A_REF / math.pi)
        e = CovEllipse(Vec2(0, 0), Cov2(r * r, 0, 0, r * r))
        assert pair_utility(e, None, self.A_REF) == pytest.approx(0.5, rel=1e-9)

    def test_small_overlap_boosts_pair_utility(self):
        # Two offset circles with a known lens overlap; pick a_ref so the
        # overlap is a tenth of it, giving 1 / 1.1.
        a = CovEllipse(Vec2(0, 0), Cov2(1, 0, 0, 1))
        b = CovEllipse(Vec2(1, 0), Cov2(1, 0, 0, 1))
        lens = circle_lens_area(1.0, 1.0, 1.0)
        got = pair_utility(a, b, a_ref=10 * lens)
        assert got == pytest.approx(1 / 1.1, rel=1e-9)
        assert got > pair_utility(a, None, a_ref=10 * lens)

    def test_requires_positive_reference_area(self):
        e = CovEllipse(Vec2(0, 0), Cov2(1, 0, 0, 1))
        with pytest.raises(ContractError):
            pair_utility(e, None, 0.0)


class TestBuildInstance:
    def radars(self, n, budget=Fraction(1)):
        return [RadarConfig(id=i, position=Vec2(1000.0 * i, 0.0), budget=budget) for i in range(n)]

    def test_dimension_count(self):
        radars = self.radars(2)
        e = CovEllipse(Vec2(0, 0), Cov2(100, 0, 0, 100))
        ellipses = {0: {j: e for j in range(3)}, 1: {j: e for j in range(3)}}
        inst = build_instance(radars, ellipses, a_ref=1000.0)
        assert len(inst.c) == 2 * 2 * 3

    def test_invisible_radar_zeroes_utilities(self):
        radars = self.radars(2)
        e = CovEllipse(Vec2(0, 0), Cov2(100, 0, 0, 100))
        ellipses = {0: {7: None}, 1: {7: e}}
        inst = build_instance(radars, ellipses, a_ref=1000.0)
        assert inst.utility(0, 0, 7) == 0.0
        assert inst.utility(0, 1, 7) == 0.0
        assert inst.utility(1, 0, 7) == 0.0
        assert inst.utility(1, 1, 7) > 0.0

    def test_mirror_symmetry(self):
        # Two radars mirror-placed about one central target see the same
        # range, so their single utilities agree.
        radars = [
            RadarConfig(id=0, position=Vec2(-5000.0, 0.0)),
            RadarConfig(id=1, position=Vec2(5000.0, 0.0)),
        ]
        from radarnet.simkit import pickup_ellipse

        target = Vec2(0.0, 0.0)
        ellipses = {cfg.id: {0: pickup_ellipse(cfg, target)} for cfg in radars}
        inst = build_instance(radars, ellipses, a_ref=19_000.0)
        assert inst.utility(0, 0, 0) == pytest.approx(inst.utility(1, 1, 0), rel=1e-12)

    def test_empty_sets_rejected(self):
        with pytest.raises(EmptyInstance):
            build_instance([], {}, a_ref=1.0)
        with pytest.raises(EmptyInstance):
            build_instance(self.radars(1), {0: {}}, a_ref=1.0)


class TestValidate:
    def instance(self):
        c = {(i, k, j): 0.5 for i in (1, 2) for k in (1, 2) for j in (1, 2, 3)}
        gamma = {(i, j): Fraction(1, 5) for i in (1, 2) for j in (1, 2, 3)}
        return CopInstance((1, 2), (1, 2, 3), c, gamma, {1: Fraction(2, 5), 2: Fraction(1)})

    def test_empty_allocation_is_feasible(self):
        assert validate(self.instance(), Allocation.empty()) == []

    def test_two_combinations_on_one_target_violate_c2(self):
        alloc = Allocation.from_triples([(1, 2, 1), (2, 2, 1)])
        kinds = {v.kind for v in validate(self.instance(), alloc)}
        assert "C2" in kinds

    def test_budget_excess_reported_exactly(self):
        inst = CopInstance(
            (1,),
            (1, 2, 3),
            {(1, 1, j): 0.5 for j in (1, 2, 3)},
            {(1, j): Fraction(1, 5) for j in (1, 2, 3)},
            {1: Fraction(2, 5)},
        )
        alloc = Allocation.from_triples([(1, 1, 1), (1, 1, 2), (1, 1, 3)])
        violations = validate(inst, alloc)
        assert len(violations) == 1
        assert violations[0].kind == "L"
        assert violations[0].excess == Fraction(1, 5)

    def test_missing_w_for_joint_x_pairs(self):
        alloc = Allocation(
            x_main=frozenset({(1, 1)}), x_optional=frozenset({(2, 1)}), w=frozenset()
        )
        violations = validate(self.instance(), alloc)
        assert any(v.kind == "A" for v in violations)

    def test_unknown_ids_are_contract_errors(self):
        with pytest.raises(ContractError):
            validate(self.instance(), Allocation.from_triples([(9, 9, 1)]))


class TestObjective:
    def test_empty_is_zero(self):
        assert objective(tiny_instance(), Allocation.empty()) == 0.0

    def test_single_triple(self):
        inst = tiny_instance(c=0.7)
        assert objective(inst, Allocation.from_triples([(1, 1, 1)])) == pytest.approx(0.7)

    def test_infeasible_rejected(self):
        inst = tiny_instance(budget=Fraction(1, 10))
        with pytest.raises(ContractError):
            objective(inst, Allocation.from_triples([(1, 1, 1)]))


class TestSolveExact:
    def test_single_radar_single_target(self):
        res = solve_exact(tiny_instance(c=0.7))
        assert res.allocation.w == frozenset({(1, 1, 1)})
        assert res.objective == pytest.approx(0.7)
        assert res.optimal

    def test_budget_below_every_load_gives_empty(self):
        inst = tiny_instance(budget=Fraction(1, 10))
        res = solve_exact(inst)
        assert res.allocation.w == frozenset()
        assert res.objective == 0.0

    @pytest.mark.parametrize("maker", [random_table_instance, random_geometric_instance])
    def test_matches_brute_force(self, maker):
        rng = np.random.default_rng(17)
        for _ in range(40):
            inst = maker(rng, int(rng.integers(1, 4)), int(rng.integers(1, 5)))
            res = solve_exact(inst)
            assert res.optimal
            assert res.objective == pytest.approx(brute_force_objective(inst), abs=1e-12)
            assert validate(inst, res.allocation) == []
            assert objective(inst, res.allocation) == pytest.approx(res.objective, abs=1e-9)

    def test_objective_invariant_under_relabeling(self):
        rng = np.random.default_rng(23)
        inst = random_table_instance(rng, 3, 4)
        radar_map = {0: 10, 1: 5, 2: 7}
        target_map = {0: 103, 1: 100, 2: 102, 3: 101}
        relabeled = CopInstance(
            tuple(radar_map[i] for i in inst.radar_ids),
            tuple(target_map[j] for j in inst.target_ids),
            {(radar_map[i], radar_map[k], target_map[j]): v for (i, k, j), v in inst.c.items()},
            {(radar_map[i], target_map[j]): g for (i, j), g in inst.gamma.items()},
            {radar_map[i]: b for i, b in inst.budget.items()},
        )
        assert solve_exact(relabeled).objective == pytest.approx(
            solve_exact(inst).objective, abs=1e-12
        )

    def test_identical_ellipses_need_no_pairs(self):
        # When every pair utility equals the single utility, some optimum
        # uses only diagonal triples; check against single-only enumeration.
        rng = np.random.default_rng(31)
        radar_ids = (0, 1, 2)
        target_ids = (0, 1, 2, 3)
        singles = {(i, j): float(rng.uniform(0.2, 0.9)) for i in radar_ids for j in target_ids}
        c = {}
        for j in target_ids:
            for i in radar_ids:
                for k in radar_ids:
                    c[(i, k, j)] = singles[(i, j)]
        gamma = {(i, j): Fraction(1, 5) for i in radar_ids for j in target_ids}
        budget = {i: Fraction(2, 5) for i in radar_ids}
        inst = CopInstance(radar_ids, target_ids, c, gamma, budget)
        single_only = CopInstance(
            radar_ids,
            target_ids,
            {(i, i, j): singles[(i, j)] for i in radar_ids for j in target_ids},
            gamma,
            budget,
        )
        assert solve_exact(inst).objective == pytest.approx(
            brute_force_objective(single_only), abs=1e-12
        )

    def test_time_limit_returns_feasible_incumbent(self):
        rng = np.random.default_rng(41)
        inst = random_table_instance(rng, 3, 4)
        res = solve_exact(inst, time_limit=0.0)
        assert validate(inst, res.allocation) == []
        assert not res.optimal


class TestInstanceJson:
    def test_round_trip(self):
        rng = np.random.default_rng(3)
        inst = random_table_instance(rng, 2, 3)
        doc = instance_to_jsonable(inst)
        back = instance_from_jsonable(json.loads(json.dumps(doc)))
        assert back.radar_ids == inst.radar_ids
        assert back.target_ids == inst.target_ids
        assert back.gamma == inst.gamma
        assert back.budget == inst.budget
        for key, v in inst.c.items():
            assert back.utility(*key) == pytest.approx(v, abs=1e-15)

    def test_malformed_documents_rejected(self):
        with pytest.raises(ContractError):
            instance_from_jsonable({"radars": []})
        with pytest.raises(ContractError):
            instance_from_jsonable(
                {"radars": [{"id": 1, "budget": "1"}], "targets": [1], "gamma": [], "c": []}
            )
