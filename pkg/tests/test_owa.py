import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fliowa.errors import ArityError, EmptyAggregationError, InvalidQuantifierError, ShapeError
from fliowa.model import ParamVector
from fliowa.owa import (
    QuantifierParams,
    induced_order,
    iowa_aggregate,
    owa_aggregate,
    q_dynamic,
    q_standard,
    weights_from_quantifier,
)

from oracles import q2_exact, q4_exact, weights_exact

P16 = QuantifierParams(0.0, 0.16, 0.8, 0.4)
unit = st.floats(0.0, 1.0, allow_nan=False)


@st.composite
def quantifier_params(draw):
    a, b, c = sorted(draw(st.lists(unit, min_size=3, max_size=3)))
    return QuantifierParams(a, b, c, draw(unit))


class TestQStandard:
    def test_endpoints(self):
        assert q_standard(0.0, 0.0, 0.8) == 0.0
        assert q_standard(1.0, 0.0, 0.8) == 1.0

    def test_middle_piece(self):
        assert q_standard(0.4, 0.0, 0.8) == pytest.approx(0.5, abs=1e-15)

    def test_flat_then_saturated(self):
        assert q_standard(0.2, 0.3, 0.7) == 0.0
        assert q_standard(0.9, 0.3, 0.7) == 1.0

    def test_degenerate_is_step(self):
        assert q_standard(0.49, 0.5, 0.5) == 0.0
        assert q_standard(0.5, 0.5, 0.5) == 1.0

    def test_zero_pinned_for_step_at_zero(self):
        assert q_standard(0.0, 0.0, 0.0) == 0.0
        assert q_standard(1e-9, 0.0, 0.0) == 1.0

    def test_rejects_reversed(self):
        with pytest.raises(InvalidQuantifierError):
            q_standard(0.5, 0.8, 0.2)

    def test_vectorised(self):
        xs = np.linspace(0, 1, 11)
        np.testing.assert_allclose(q_standard(xs, 0.0, 0.5), np.minimum(xs / 0.5, 1.0), atol=1e-15)


class TestQDynamic:
    def test_first_piece(self):
        assert q_dynamic(0.1, P16) == pytest.approx(0.25, abs=1e-15)

    def test_second_piece(self):
        assert q_dynamic(0.5, P16) == pytest.approx(0.71875, abs=1e-15)
        assert float(q4_exact(0.5, 0, 0.16, 0.8, 0.4)) == 0.71875

    def test_past_c(self):
        assert q_dynamic(0.9, P16) == 1.0

    def test_hits_y_b_at_b(self):
        assert q_dynamic(0.16, P16) == pytest.approx(0.4, abs=1e-15)

    def test_accepts_tuple(self):
        assert q_dynamic(0.1, (0, 0.16, 0.8, 0.4)) == q_dynamic(0.1, P16)

    @pytest.mark.parametrize("params", [(0.5, 0.2, 0.8, 0.5), (0, 0.2, 0.8, 1.5), (0, 0.2, 1.2, 0.5), (-0.1, 0.2, 0.8, 0.5)])
    def test_invalid_params(self, params):
        with pytest.raises(InvalidQuantifierError):
            q_dynamic(0.5, params)

    def test_degenerate_b_equals_c(self):
        p = QuantifierParams(0.0, 0.5, 0.5, 0.3)
        assert q_dynamic(0.49, p) < 0.3
        assert q_dynamic(0.5, p) == 1.0

    def test_degenerate_a_equals_b(self):
        p = QuantifierParams(0.2, 0.2, 0.8, 0.3)
        assert q_dynamic(0.19, p) == 0.0
        assert q_dynamic(0.2, p) == pytest.approx(0.3)

    @given(quantifier_params(), st.lists(unit, min_size=1, max_size=30))
    def test_matches_exact_oracle(self, p, xs):
        got = q_dynamic(np.array(xs), p)
        want = [float(q4_exact(x, p.a, p.b, p.c, p.y_b)) for x in xs]
        np.testing.assert_allclose(got, want, atol=1e-12)

    @given(quantifier_params(), unit, unit)
    def test_monotone(self, p, x, y):
        lo, hi = min(x, y), max(x, y)
        assert q_dynamic(lo, p) <= q_dynamic(hi, p)

    @given(quantifier_params())
    def test_boundary_values(self, p):
        assert q_dynamic(0.0, p) == 0.0
        assert q_dynamic(1.0, p) == 1.0

    def test_reduces_to_standard(self):
        rng = np.random.default_rng(11)
        xs = np.linspace(0.0, 1.0, 10_001)
        for _ in range(100):
            a, b, c = np.sort(rng.uniform(0, 1, 3))
            if c - a < 1e-9:
                continue
            p = QuantifierParams(a, b, c, (b - a) / (c - a))
            np.testing.assert_allclose(q_dynamic(xs, p), q_standard(xs, a, c), atol=1e-12)


class TestWeightsFromQuantifier:
    def test_al80_five(self):
        w = weights_from_quantifier(5, lambda x: q_standard(x, 0, 0.8))
        np.testing.assert_allclose(w, [0.25, 0.25, 0.25, 0.25, 0.0], atol=1e-15)

    def test_dynamic_ten(self):
        w = weights_from_quantifier(10, lambda x: q_dynamic(x, P16))
        expected = [0.25, 0.1875] + [0.09375] * 6 + [0.0, 0.0]
        np.testing.assert_allclose(w, expected, atol=1e-12)
        oracle = weights_exact(10, lambda x: q4_exact(x, 0, 0.16, 0.8, 0.4))
        np.testing.assert_allclose(w, [float(v) for v in oracle], atol=1e-12)

    @pytest.mark.parametrize("q", [lambda x: q_standard(x, 0, 0.8), lambda x: q_dynamic(x, P16), lambda x: q_standard(x, 0, 0)])
    def test_single_argument(self, q):
        np.testing.assert_array_equal(weights_from_quantifier(1, q), [1.0])

    def test_zero_arguments(self):
        with pytest.raises(EmptyAggregationError):
            weights_from_quantifier(0, lambda x: x)

    @given(quantifier_params(), st.integers(1, 60))
    def test_nonnegative_and_normalised(self, p, n):
        w = weights_from_quantifier(n, lambda x: q_dynamic(x, p))
        assert w.shape == (n,)
        assert np.all(w >= 0)
        assert abs(w.sum() - 1.0) < 1e-9

    @given(quantifier_params(), st.integers(1, 25))
    def test_matches_exact_oracle(self, p, n):
        w = weights_from_quantifier(n, lambda x: q_dynamic(x, p))
        oracle = weights_exact(n, lambda x: q4_exact(x, p.a, p.b, p.c, p.y_b))
        np.testing.assert_allclose(w, [float(v) for v in oracle], atol=1e-12)

    def test_linear_quantifier_gives_uniform(self):
        np.testing.assert_allclose(weights_from_quantifier(7, lambda x: q_standard(x, 0, 1)), np.full(7, 1 / 7))


class TestIOWAAggregate:
    def test_full_weight_on_top(self):
        out = iowa_aggregate([(0.9, [2.0]), (0.5, [4.0])], [1.0, 0.0])
        np.testing.assert_array_equal(out, [2.0])

    def test_equal_weights_order_free(self):
        out = iowa_aggregate([(0.5, [4.0]), (0.9, [2.0])], [0.5, 0.5])
        np.testing.assert_array_equal(out, [3.0])

    def test_three_pairs(self):
        pairs = [(0.9, [1.0, 0.0]), (0.8, [0.0, 1.0]), (0.1, [9.0, 9.0])]
        np.testing.assert_allclose(iowa_aggregate(pairs, [0.5, 0.5, 0.0]), [0.5, 0.5])

    def test_order_follows_inducing_not_values(self):
        pairs = [(0.1, [100.0]), (0.9, [-5.0])]
        np.testing.assert_array_equal(iowa_aggregate(pairs, [1.0, 0.0]), [-5.0])

    def test_tie_break_by_id(self):
        pairs = [(0.5, [1.0]), (0.5, [2.0])]
        np.testing.assert_array_equal(iowa_aggregate(pairs, [1.0, 0.0]), [1.0])
        np.testing.assert_array_equal(iowa_aggregate(pairs, [1.0, 0.0], ids=[7, 3]), [2.0])

    def test_param_vectors(self):
        shapes = ((1, 2), (2,))
        a = ParamVector(np.arange(4.0), shapes)
        b = ParamVector(np.ones(4), shapes)
        out = iowa_aggregate([(0.2, a), (0.7, b)], [0.75, 0.25])
        assert isinstance(out, ParamVector) and out.shapes == shapes
        np.testing.assert_allclose(out.values, 0.75 * b.values + 0.25 * a.values)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            iowa_aggregate([(0.1, [1.0]), (0.2, [1.0, 2.0])], [0.5, 0.5])

    def test_layout_mismatch(self):
        a = ParamVector(np.zeros(4), ((2, 2),))
        b = ParamVector(np.zeros(4), ((4,),))
        with pytest.raises(ShapeError):
            iowa_aggregate([(0.1, a), (0.2, b)], [0.5, 0.5])

    def test_arity_mismatch(self):
        with pytest.raises(ArityError):
            iowa_aggregate([(0.1, [1.0])], [0.5, 0.5])

    def test_empty(self):
        with pytest.raises(EmptyAggregationError):
            iowa_aggregate([], [])

    @settings(max_examples=50)
    @given(st.integers(1, 8), st.integers(0, 2**32 - 1))
    def test_uniform_weights_give_mean(self, n, seed):
        rng = np.random.default_rng(seed)
        vecs = rng.normal(size=(n, 5))
        u = rng.uniform(size=n)
        out = iowa_aggregate(list(zip(u, vecs)), np.full(n, 1 / n))
        np.testing.assert_allclose(out, vecs.mean(axis=0), atol=1e-9)

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_permutation_invariant(self, n):
        rng = np.random.default_rng(n)
        vecs = rng.normal(size=(n, 3))
        # include a tie so the id tie-break is exercised
        u = rng.choice([0.2, 0.5, 0.9], size=n)
        ids = np.arange(n)
        w = weights_from_quantifier(n, lambda x: q_dynamic(x, (0, 0.3, 0.9, 0.6)))
        ref = iowa_aggregate(list(zip(u, vecs)), w, ids)
        for perm in itertools.permutations(range(n)):
            perm = list(perm)
            got = iowa_aggregate(list(zip(u[perm], vecs[perm])), w, ids[perm])
            np.testing.assert_array_equal(got, ref)

    def test_repeatable_bitwise(self):
        rng = np.random.default_rng(3)
        vecs = rng.normal(size=(6, 50))
        u = rng.uniform(size=6)
        w = rng.dirichlet(np.ones(6))
        first = iowa_aggregate(list(zip(u, vecs)), w)
        for _ in range(3):
            np.testing.assert_array_equal(iowa_aggregate(list(zip(u, vecs)), w), first)


class TestOrdering:
    def test_induced_order(self):
        np.testing.assert_array_equal(induced_order([0.3, 0.9, 0.5]), [1, 2, 0])

    def test_induced_order_ties(self):
        np.testing.assert_array_equal(induced_order([0.5, 0.5, 0.7], ids=[4, 2, 9]), [2, 1, 0])

    def test_owa_sorts_by_value(self):
        assert owa_aggregate([1.0, 5.0, 3.0], [1.0, 0.0, 0.0]) == 5.0
        assert owa_aggregate([1.0, 5.0, 3.0], [0.0, 0.0, 1.0]) == 1.0
