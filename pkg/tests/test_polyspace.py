import itertools
import json
import math

import numpy as np
import pytest

from graphdiff.polyspace import (
    BasisKind,
    MultiIndexSet,
    closest_order,
    eval_basis,
    explicit_set,
    hyperbolic_cross_cardinality,
    hyperbolic_cross_set,
    intrinsic_weights,
    is_lower,
    order_with_cardinality,
    sample_measure,
    total_degree_cardinality,
    total_degree_set,
)


class TestTotalDegree:
    def test_small_example(self):
        s = total_degree_set(2, 1)
        assert set(s.as_tuples()) == {(0, 0), (1, 0), (0, 1)}
        assert len(s) == 3

    def test_cardinality_formula_all_small_dims(self):
        for d in range(1, 11):
            for n in range(0, 11):
                assert len(total_degree_set(d, n)) == math.comb(n + d, d)

    def test_matches_independent_enumeration(self):
        for d in (1, 2, 3, 4):
            for n in (0, 1, 3, 5):
                brute = {
                    nu
                    for nu in itertools.product(range(n + 1), repeat=d)
                    if sum(nu) <= n
                }
                assert set(total_degree_set(d, n).as_tuples()) == brute

    def test_reported_cardinalities(self):
        assert len(total_degree_set(3, 24)) == 2925
        assert len(total_degree_set(6, 8)) == 3003
        assert len(total_degree_set(10, 5)) == 3003


class TestHyperbolicCross:
    def test_small_example(self):
        s = hyperbolic_cross_set(2, 1)
        assert set(s.as_tuples()) == {(0, 0), (1, 0), (0, 1)}

    def test_order_zero_is_origin(self):
        for d in (1, 2, 5):
            s = hyperbolic_cross_set(d, 0)
            assert s.as_tuples() == [(0,) * d]

    def test_matches_independent_enumeration(self):
        for d in (1, 2, 3):
            for n in (0, 1, 4, 7):
                brute = {
                    nu
                    for nu in itertools.product(range(n + 1), repeat=d)
                    if math.prod(v + 1 for v in nu) <= n + 1
                }
                assert set(hyperbolic_cross_set(d, n).as_tuples()) == brute

    def test_subset_of_total_degree(self):
        for d, n in ((2, 4), (3, 6), (4, 5)):
            hc = set(hyperbolic_cross_set(d, n).as_tuples())
            td = set(total_degree_set(d, n).as_tuples())
            assert hc <= td

    def test_counting_function_matches_enumeration(self):
        for d, n in ((1, 9), (2, 7), (3, 12), (6, 5), (10, 3)):
            assert hyperbolic_cross_cardinality(d, n) == len(hyperbolic_cross_set(d, n))

    def test_cardinality_bound(self):
        # bound applies to the order n-1 set
        for d, n in ((2, 3), (3, 5), (4, 8), (6, 10)):
            card = hyperbolic_cross_cardinality(d, n - 1)
            bound = min(2 * n**3 * 4**d, math.e * n ** (2 + math.log2(d)))
            assert card <= bound

    def test_orders_found_for_reported_cardinalities(self):
        assert order_with_cardinality("hyperbolic_cross", 3, 3143) == 178
        assert order_with_cardinality("hyperbolic_cross", 6, 3119) == 42
        # d=10: the cardinality sequence jumps from 2626 (order 18) to 3176
        # (order 19), so 3076 is not attainable for this family
        assert hyperbolic_cross_cardinality(10, 18) == 2626
        assert hyperbolic_cross_cardinality(10, 19) == 3176
        assert order_with_cardinality("hyperbolic_cross", 10, 3076) is None

    def test_closest_order(self):
        assert closest_order("total_degree", 3, 3000) == 24
        assert closest_order("total_degree", 6, 3000) == 8
        assert closest_order("total_degree", 10, 3000) == 5
        assert closest_order("hyperbolic_cross", 10, 3076) == 19


class TestIsLower:
    def test_hole_detected(self):
        assert not is_lower(explicit_set(2, [(0, 0), (2, 0)]))

    def test_families_are_lower(self):
        for d, n in ((1, 5), (2, 4), (3, 6)):
            assert is_lower(total_degree_set(d, n))
            assert is_lower(hyperbolic_cross_set(d, n))

    def test_empty_set_is_lower(self):
        assert is_lower(explicit_set(2, np.zeros((0, 2), dtype=int)))

    def test_union_of_lower_sets_is_hyperbolic_cross(self):
        # in 2 dimensions, for each cardinality s, the union of all lower
        # sets with exactly s elements equals the hyperbolic cross of order s-1
        for s in range(1, 6):
            candidates = hyperbolic_cross_set(2, s - 1).as_tuples()
            union = set()
            for subset in itertools.combinations(candidates, s):
                if is_lower(explicit_set(2, list(subset))):
                    union |= set(subset)
            assert union == set(candidates)


class TestMultiIndexSet:
    def test_duplicates_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            explicit_set(2, [(1, 0), (1, 0)])

    def test_negative_entries_rejected(self):
        with pytest.raises(ValueError, match="nonnegative"):
            explicit_set(2, [(-1, 0)])

    def test_graded_lexicographic_order(self):
        s = explicit_set(2, [(2, 0), (0, 0), (1, 0), (0, 1), (1, 1)])
        assert s.as_tuples() == [(0, 0), (0, 1), (1, 0), (1, 1), (2, 0)]

    def test_json_round_trip(self):
        s = total_degree_set(3, 2)
        back = MultiIndexSet.from_json(s.to_json())
        assert back.as_tuples() == s.as_tuples()


class TestEvalBasis:
    def test_constant_index_is_one(self):
        s = explicit_set(2, [(0, 0)])
        pts = np.array([[0.3, -0.8], [1.0, -1.0]])
        for kind in BasisKind:
            assert np.array_equal(eval_basis(kind, s, pts), np.ones((2, 1)))

    def test_legendre_degree_one(self):
        s = explicit_set(1, [(1,)])
        out = eval_basis("legendre", s, np.array([[0.5]]))
        assert out[0, 0] == pytest.approx(math.sqrt(3) * 0.5, abs=1e-12)

    def test_chebyshev_degree_one(self):
        s = explicit_set(1, [(1,)])
        out = eval_basis("chebyshev", s, np.array([[0.5]]))
        assert out[0, 0] == pytest.approx(math.sqrt(2) * 0.5, abs=1e-12)

    def test_chebyshev_matches_trig_form_high_degree(self):
        degree = 200
        s = explicit_set(1, [(degree,)])
        x = np.linspace(-1, 1, 41)
        out = eval_basis("chebyshev", s, x[:, None])[:, 0]
        expected = math.sqrt(2) * np.cos(degree * np.arccos(x))
        assert np.allclose(out, expected, atol=1e-9)

    def test_legendre_high_degree_stable(self):
        degree = 200
        s = explicit_set(1, [(degree,)])
        x = np.linspace(-1, 1, 101)
        out = eval_basis("legendre", s, x[:, None])[:, 0]
        bound = math.sqrt(2 * degree + 1)
        assert np.all(np.abs(out) <= bound + 1e-9)
        assert out[-1] == pytest.approx(bound, rel=1e-12)  # value at y = 1

    def test_tensor_product_structure(self):
        s = explicit_set(2, [(2, 3)])
        pts = np.array([[0.4, -0.7]])
        out = eval_basis("legendre", s, pts)
        x1 = eval_basis("legendre", explicit_set(1, [(2,)]), np.array([[0.4]]))
        x2 = eval_basis("legendre", explicit_set(1, [(3,)]), np.array([[-0.7]]))
        assert out[0, 0] == pytest.approx(x1[0, 0] * x2[0, 0], rel=1e-14)

    def test_domain_violation(self):
        s = total_degree_set(2, 1)
        with pytest.raises(ValueError, match=r"\[-1, 1\]"):
            eval_basis("legendre", s, np.array([[0.0, 1.0001]]))

    def test_empty_points(self):
        s = total_degree_set(2, 2)
        out = eval_basis("legendre", s, np.empty((0, 2)))
        assert out.shape == (0, len(s))

    @pytest.mark.parametrize("kind", ["legendre", "chebyshev"])
    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_orthonormal_under_quadrature(self, kind, d):
        # Gauss rules exact for products of degree <= 2 * 8
        q = 12
        if kind == "legendre":
            nodes, weights = np.polynomial.legendre.leggauss(q)
            weights = weights / 2.0  # probability normalization of dx on [-1, 1]
        else:
            k = np.arange(1, q + 1)
            nodes = np.cos((2 * k - 1) * np.pi / (2 * q))
            weights = np.full(q, 1.0 / q)
        grids = np.meshgrid(*([nodes] * d), indexing="ij")
        pts = np.column_stack([g.ravel() for g in grids])
        wgrids = np.meshgrid(*([weights] * d), indexing="ij")
        wts = np.prod(np.stack([g.ravel() for g in wgrids]), axis=0)
        s = total_degree_set(d, 8)
        basis = eval_basis(kind, s, pts)
        gram = basis.T @ (wts[:, None] * basis)
        assert np.abs(gram - np.eye(len(s))).max() <= 1e-10


class TestIntrinsicWeights:
    def test_constant_index(self):
        s = explicit_set(3, [(0, 0, 0)])
        for kind in BasisKind:
            assert intrinsic_weights(kind, s).tolist() == [1.0]

    def test_legendre_values(self):
        s = explicit_set(2, [(2, 1)])
        assert intrinsic_weights("legendre", s)[0] == pytest.approx(math.sqrt(5) * math.sqrt(3))

    def test_chebyshev_counts_nonzero_entries(self):
        s = explicit_set(3, [(3, 0, 7)])
        assert intrinsic_weights("chebyshev", s)[0] == pytest.approx(2.0)

    @pytest.mark.parametrize("kind", ["legendre", "chebyshev"])
    def test_matches_grid_sup(self, kind):
        s = total_degree_set(2, 4)
        grid = np.linspace(-1, 1, 201)
        xs, ys = np.meshgrid(grid, grid)
        pts = np.column_stack([xs.ravel(), ys.ravel()])
        sup = np.abs(eval_basis(kind, s, pts)).max(axis=0)
        w = intrinsic_weights(kind, s)
        assert np.all(sup <= w + 1e-9)
        if kind == "legendre":
            assert np.allclose(sup, w, rtol=1e-12)  # sup attained at the corner (1, 1)


class TestSampleMeasure:
    def test_uniform_mean_clt(self):
        m = 100_000
        pts = sample_measure("legendre", 1, m, seed=0)
        assert abs(pts.mean()) <= 4 / math.sqrt(m)

    def test_chebyshev_range(self):
        pts = sample_measure("chebyshev", 3, 500, seed=1)
        assert pts.min() >= -1.0 and pts.max() <= 1.0

    def test_deterministic(self):
        a = sample_measure("chebyshev", 2, 50, seed=42)
        b = sample_measure("chebyshev", 2, 50, seed=42)
        assert np.array_equal(a, b)

    def test_chebyshev_mass_concentrates_at_edges(self):
        # arcsine law: P(|y| > 1/sqrt(2)) = 1/2
        pts = sample_measure("chebyshev", 1, 200_000, seed=3)
        frac = np.mean(np.abs(pts) > 1 / math.sqrt(2))
        assert abs(frac - 0.5) < 0.01

    def test_invalid_count(self):
        with pytest.raises(ValueError, match="at least one"):
            sample_measure("legendre", 2, 0, seed=0)
