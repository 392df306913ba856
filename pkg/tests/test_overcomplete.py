"""Khatri-Rao flattening: plans, rank-one unflattening, overcomplete recovery."""

import numpy as np
import pytest

from tensordec import (
    FlatteningPlan,
    JennrichConfig,
    PreconditionError,
    default_plan,
    jennrich_decompose,
    match_terms,
    outer_product,
    overcomplete_decompose,
    smoothed_decomposition,
    synthesize,
    unflatten_rank_one,
)


class TestFlatteningPlan:
    def test_groups_must_partition_modes(self):
        with pytest.raises(PreconditionError):
            FlatteningPlan(order=3, groups=((0,), (1,), (1,)))
        with pytest.raises(PreconditionError):
            FlatteningPlan(order=4, groups=((0,), (1,), (2,)))
        with pytest.raises(PreconditionError):
            FlatteningPlan(order=3, groups=((0,), (1,), ()))

    def test_valid_plan(self):
        plan = FlatteningPlan(order=5, groups=((0, 1), (2, 3), (4,)))
        assert plan.order == 5


class TestDefaultPlan:
    def test_order3_is_identity(self):
        assert default_plan((4, 4, 4)).groups == ((0,), (1,), (2,))

    def test_order5_uniform_balances_side_groups(self):
        # contiguous split of n^5 maximizing the smaller side product
        assert default_plan((4, 4, 4, 4, 4)).groups == ((0, 1), (2, 3), (4,))

    def test_uneven_shape_puts_weight_where_it_helps(self):
        # modes (2, 2, 9, 2, 2): grouping (0,1),(2),(3,4) gives side sizes
        # (4, 9) with min 4; every other contiguous split has min <= 4 and
        # less balance.
        plan = default_plan((2, 2, 9, 2, 2))
        sizes = [int(np.prod([(2, 2, 9, 2, 2)[m] for m in g])) for g in plan.groups]
        assert min(sizes[0], sizes[1]) == 4

    def test_order4(self):
        plan = default_plan((3, 3, 3, 3))
        assert plan.order == 4
        assert sum(len(g) for g in plan.groups) == 4


class TestUnflattenRankOne:
    def test_exact_two_mode(self):
        x = np.array([1.0, -2.0, 0.5])
        y = np.array([2.0, 1.0])
        vecs, residual = unflatten_rank_one(np.kron(x, y), [3, 2])
        assert residual <= 1e-10
        assert np.allclose(np.kron(vecs[0], vecs[1]), np.kron(x, y), atol=1e-10)

    def test_noisy_two_mode(self):
        rng = np.random.default_rng(0)
        x = np.array([1.0, -2.0, 0.5])
        y = np.array([2.0, 1.0])
        flat = np.kron(x, y) + rng.uniform(-1e-6, 1e-6, 6)
        vecs, residual = unflatten_rank_one(flat, [3, 2])
        assert residual <= 1e-5

    def test_identity_flatten_flagged_not_rank_one(self):
        # vec(I_2) has two equal singular values; the best rank-one fit
        # captures half the energy, so the relative residual is 1/sqrt(2).
        vecs, residual = unflatten_rank_one(np.eye(2).ravel(), [2, 2])
        assert residual == pytest.approx(1.0 / np.sqrt(2), abs=1e-12)

    def test_exact_three_mode(self):
        rng = np.random.default_rng(1)
        xs = [rng.standard_normal(s) for s in (3, 2, 4)]
        flat = outer_product(xs).data.ravel()
        vecs, residual = unflatten_rank_one(flat, [3, 2, 4])
        assert residual <= 1e-10
        recon = outer_product(vecs).data.ravel()
        assert np.allclose(recon, flat, atol=1e-10)

    def test_size_mismatch_rejected(self):
        with pytest.raises(PreconditionError):
            unflatten_rank_one(np.ones(5), [2, 2])


class TestOvercompleteDecompose:
    def test_rank_one_order5(self):
        rng = np.random.default_rng(2)
        vecs = [rng.standard_normal(2) for _ in range(5)]
        t = outer_product(vecs)
        found, report = overcomplete_decompose(t)
        assert found.rank == 1
        recon = synthesize(found)
        assert np.allclose(recon.data, t.data, atol=1e-8)

    def test_overcomplete_rank_beyond_mode_size(self):
        # k = 7 exceeds every mode size n = 4; the order-5 flattening makes
        # the side factors tall enough for simultaneous diagonalization.
        truth = smoothed_decomposition((4, 4, 4, 4, 4), 7, rho=0.5, seed=5)
        t = synthesize(truth)
        found, report = overcomplete_decompose(t)
        assert found.rank == 7
        assert match_terms(found, truth).max_error < 1e-5
        assert report.suspect_terms == []
        assert max(report.unflatten_residuals) < 1e-6

    def test_identity_plan_distpatches_to_jennrich_bitwise(self):
        truth = smoothed_decomposition((5, 5, 5), 3, rho=0.5, seed=6)
        t = synthesize(truth)
        cfg = JennrichConfig(seed=9)
        via_plan, _ = overcomplete_decompose(
            t, plan=FlatteningPlan(order=3, groups=((0,), (1,), (2,))), config=cfg
        )
        direct, _ = jennrich_decompose(t, cfg)
        for f, g in zip(via_plan.factors, direct.factors):
            assert np.array_equal(f, g)
        assert np.array_equal(via_plan.weights, direct.weights)

    def test_custom_plan(self):
        # non-default grouping; k must fit the smaller fused side (3 here)
        truth = smoothed_decomposition((3, 3, 3, 3), 3, rho=0.5, seed=7)
        t = synthesize(truth)
        plan = FlatteningPlan(order=4, groups=((0, 1), (2,), (3,)))
        found, _ = overcomplete_decompose(t, plan=plan)
        assert match_terms(found, truth).max_error < 1e-5

    def test_plan_order_must_match(self):
        truth = smoothed_decomposition((3, 3, 3), 2, rho=0.5, seed=8)
        plan = FlatteningPlan(order=4, groups=((0,), (1,), (2, 3)))
        with pytest.raises(PreconditionError):
            overcomplete_decompose(synthesize(truth), plan=plan)

    def test_report_carries_unflatten_residuals(self):
        truth = smoothed_decomposition((4, 4, 4, 4, 4), 6, rho=0.5, seed=9)
        found, report = overcomplete_decompose(synthesize(truth))
        assert len(report.unflatten_residuals) == 6
        assert report.suspect_terms == []
