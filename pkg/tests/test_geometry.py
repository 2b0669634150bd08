from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from shotlocker.errors import (
    ConfigError,
    DegenerateVectorError,
    DimensionMismatchError,
    EmptyInputError,
    InsufficientDataError,
)
from shotlocker.geometry import (
    EmbeddingMatrix,
    Measure,
    Standardizer,
    apply_standardizer,
    cosine_distance,
    euclidean_distance,
    fit_standardizer,
    l2_normalize,
    mean_pool,
    measure_distance,
    measure_distances,
)

finite_vectors = st.lists(
    st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, allow_infinity=False),
    min_size=2,
    max_size=12,
)


class TestMeanPool:
    def test_single_row_is_identity(self):
        v = np.array([1.5, -2.0, 3.0])
        np.testing.assert_array_equal(mean_pool(v[None, :]), v)

    def test_two_axis_rows(self):
        np.testing.assert_allclose(mean_pool([[1.0, 0.0], [0.0, 1.0]]), [0.5, 0.5])

    def test_against_accumulate_then_divide_oracle(self):
        rng = np.random.default_rng(0)
        rows = rng.normal(size=(20, 7))
        pooled = mean_pool(rows)
        expected = oracles.naive_mean_pool(rows.tolist())
        assert np.max(np.abs(pooled - expected)) < 1e-12

    def test_zero_rows_rejected(self):
        with pytest.raises(EmptyInputError):
            mean_pool(np.zeros((0, 4)))


class TestEuclidean:
    def test_identity(self):
        v = np.array([1.0, 2.0, 3.0])
        assert euclidean_distance(v, v) == 0.0

    def test_pythagorean(self):
        assert euclidean_distance([0.0, 0.0], [3.0, 4.0]) == pytest.approx(5.0)

    def test_against_loop_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            u, v = rng.normal(size=(2, 16))
            got = euclidean_distance(u, v)
            want = oracles.naive_euclidean(u, v)
            assert abs(got - want) <= 1e-12 * max(1.0, abs(want))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            euclidean_distance([1.0, 2.0], [1.0, 2.0, 3.0])

    @given(finite_vectors)
    @settings(max_examples=50, deadline=None)
    def test_symmetry(self, values):
        u = np.array(values)
        v = u[::-1].copy()
        assert euclidean_distance(u, v) == euclidean_distance(v, u)


class TestCosine:
    def test_identity_is_zero(self):
        v = np.array([0.3, -0.7, 2.0])
        assert cosine_distance(v, v) == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal_axes(self):
        assert cosine_distance([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)

    def test_worked_example(self):
        # dot = 8, norms = 3 and 3
        assert cosine_distance([1.0, 2.0, 2.0], [2.0, 1.0, 2.0]) == pytest.approx(1 - 8 / 9)

    def test_zero_vector_rejected(self):
        with pytest.raises(DegenerateVectorError):
            cosine_distance([0.0, 0.0], [1.0, 0.0])

    def test_range_clipped(self):
        assert 0.0 <= cosine_distance([1.0, 0.0], [-1.0, 0.0]) <= 2.0

    def test_against_loop_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            u, v = rng.normal(size=(2, 10))
            got = cosine_distance(u, v)
            want = oracles.naive_cosine(u, v)
            assert abs(got - want) <= 1e-12

    def test_scale_invariance(self):
        rng = np.random.default_rng(3)
        u, v = rng.normal(size=(2, 8))
        base = cosine_distance(u, v)
        for alpha, beta in [(2.0, 5.0), (0.01, 300.0), (7.5, 0.125)]:
            assert cosine_distance(alpha * u, beta * v) == pytest.approx(base, abs=1e-9)

    def test_symmetry(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            u, v = rng.normal(size=(2, 6))
            assert cosine_distance(u, v) == cosine_distance(v, u)


class TestNormalize:
    def test_three_four(self):
        np.testing.assert_allclose(l2_normalize([3.0, 4.0]), [0.6, 0.8])

    def test_unit_vector_fixed_point(self):
        v = np.array([1.0, 0.0, 0.0])
        np.testing.assert_array_equal(l2_normalize(v), v)

    def test_idempotent(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            v = rng.normal(size=9)
            once = l2_normalize(v)
            twice = l2_normalize(once)
            assert np.max(np.abs(twice - once)) < 1e-12

    def test_output_norm_is_one(self):
        rng = np.random.default_rng(6)
        v = l2_normalize(rng.normal(size=12) * 1e4)
        assert abs(np.linalg.norm(v) - 1.0) < 1e-12

    def test_zero_vector_rejected(self):
        with pytest.raises(DegenerateVectorError):
            l2_normalize([0.0, 0.0, 0.0])


class TestStandardizer:
    def test_hand_example_with_constant_dimension(self):
        matrix = EmbeddingMatrix(vectors=[[0.0, 10.0], [2.0, 10.0]], ids=[0, 1])
        s = fit_standardizer(matrix, epsilon=1e-8)
        np.testing.assert_allclose(s.mean, [1.0, 10.0])
        assert s.std[0] == pytest.approx(np.sqrt(2.0))
        assert s.std[1] == 1e-8

    def test_standardized_rows_are_a_fixed_point(self):
        rng = np.random.default_rng(7)
        raw = rng.normal(size=(50, 4))
        z = (raw - raw.mean(axis=0)) / raw.std(axis=0, ddof=1)
        s = fit_standardizer(EmbeddingMatrix(vectors=z, ids=range(50)))
        np.testing.assert_allclose(s.mean, 0.0, atol=1e-12)
        np.testing.assert_allclose(s.std, 1.0, atol=1e-12)

    def test_self_application_zero_mean_unit_std(self):
        rng = np.random.default_rng(8)
        matrix = EmbeddingMatrix(vectors=rng.normal(2.0, 3.0, size=(40, 6)), ids=range(40))
        s = fit_standardizer(matrix)
        transformed = apply_standardizer(s, matrix.vectors)
        means, stds = oracles.naive_mean_std(transformed.tolist())
        assert max(abs(m) for m in means) < 1e-9
        assert max(abs(sd - 1.0) for sd in stds) < 1e-9

    def test_fit_against_loop_oracle(self):
        rng = np.random.default_rng(9)
        rows = rng.normal(size=(30, 5))
        s = fit_standardizer(EmbeddingMatrix(vectors=rows, ids=range(30)))
        means, stds = oracles.naive_mean_std(rows.tolist())
        np.testing.assert_allclose(s.mean, means, atol=1e-12)
        np.testing.assert_allclose(s.std, stds, atol=1e-12)

    def test_too_few_rows(self):
        with pytest.raises(InsufficientDataError):
            fit_standardizer(EmbeddingMatrix(vectors=[[1.0, 2.0]], ids=[0]))

    def test_apply_at_mean_is_zero(self):
        s = Standardizer(mean=np.array([1.0, 2.0]), std=np.array([3.0, 4.0]))
        np.testing.assert_array_equal(apply_standardizer(s, [1.0, 2.0]), [0.0, 0.0])

    def test_identity_standardizer(self):
        s = Standardizer(mean=np.zeros(3), std=np.ones(3))
        v = np.array([0.5, -1.0, 9.0])
        np.testing.assert_array_equal(apply_standardizer(s, v), v)

    def test_apply_then_invert_recovers(self):
        rng = np.random.default_rng(10)
        matrix = EmbeddingMatrix(vectors=rng.normal(size=(20, 4)), ids=range(20))
        s = fit_standardizer(matrix)
        v = rng.normal(size=4)
        recovered = apply_standardizer(s, v) * s.std + s.mean
        assert np.max(np.abs(recovered - v)) < 1e-9

    def test_dimension_mismatch(self):
        s = Standardizer(mean=np.zeros(3), std=np.ones(3))
        with pytest.raises(DimensionMismatchError):
            apply_standardizer(s, [1.0, 2.0])


class TestMeasureDistance:
    def test_plain_euclidean(self):
        m = Measure("euclidean")
        assert measure_distance(m, None, [0.0, 0.0], [3.0, 4.0]) == pytest.approx(5.0)

    def test_normalized_euclidean_equals_sqrt_two_cosine(self):
        rng = np.random.default_rng(11)
        m = Measure("euclidean", normalize_first=True)
        for _ in range(30):
            u, v = rng.normal(size=(2, 8))
            lhs = measure_distance(m, None, u, v)
            rhs = np.sqrt(2.0 * cosine_distance(u, v))
            assert abs(lhs - rhs) < 1e-9

    def test_cosine_normalization_is_a_noop(self):
        rng = np.random.default_rng(12)
        for _ in range(30):
            u, v = rng.normal(size=(2, 8))
            plain = measure_distance(Measure("cosine"), None, u, v)
            normed = measure_distance(Measure("cosine", normalize_first=True), None, u, v)
            assert abs(plain - normed) < 1e-12

    def test_standardize_requires_standardizer(self):
        m = Measure("euclidean", standardize_first=True)
        with pytest.raises(ConfigError):
            measure_distance(m, None, [1.0], [2.0])

    def test_standardize_then_normalize_order(self):
        s = Standardizer(mean=np.array([1.0, 1.0]), std=np.array([2.0, 2.0]))
        m = Measure("euclidean", normalize_first=True, standardize_first=True)
        u, v = np.array([3.0, 1.0]), np.array([1.0, 3.0])
        # standardized: (1,0) and (0,1); normalized unchanged; distance sqrt(2)
        assert measure_distance(m, s, u, v) == pytest.approx(np.sqrt(2.0))

    def test_unknown_kind_rejected(self):
        with pytest.raises(ConfigError):
            Measure("manhattan")

    def test_vectorized_matches_pairwise(self):
        rng = np.random.default_rng(13)
        matrix = rng.normal(size=(25, 6))
        query = rng.normal(size=6)
        fitted = fit_standardizer(EmbeddingMatrix(vectors=matrix, ids=range(25)))
        for m in [
            Measure("euclidean"),
            Measure("cosine"),
            Measure("euclidean", normalize_first=True),
            Measure("cosine", standardize_first=True),
            Measure("euclidean", normalize_first=True, standardize_first=True),
        ]:
            s = fitted if m.standardize_first else None
            batch = measure_distances(m, s, query, matrix)
            singles = [measure_distance(m, s, query, row) for row in matrix]
            np.testing.assert_allclose(batch, singles, atol=1e-12)


class TestRankingEquivalence:
    def test_cosine_order_equals_normalized_euclidean_order(self):
        rng = np.random.default_rng(14)
        for _ in range(10):
            n = int(rng.integers(5, 200))
            matrix = rng.normal(size=(n, 12))
            query = rng.normal(size=12)
            d_cos = measure_distances(Measure("cosine"), None, query, matrix)
            d_euc = measure_distances(Measure("euclidean", normalize_first=True), None, query, matrix)
            assert list(np.lexsort((np.arange(n), d_cos))) == list(np.lexsort((np.arange(n), d_euc)))


class TestEmbeddingMatrix:
    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValueError, match="not unique"):
            EmbeddingMatrix(vectors=[[1.0], [2.0]], ids=[3, 3])

    def test_row_lookup_and_subset(self):
        matrix = EmbeddingMatrix(vectors=[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], ids=[10, 20, 30])
        np.testing.assert_array_equal(matrix.row(20), [0.0, 1.0])
        sub = matrix.subset([30, 10])
        assert list(sub.ids) == [30, 10]
        np.testing.assert_array_equal(sub.vectors[0], [1.0, 1.0])

    def test_rows_are_immutable(self):
        matrix = EmbeddingMatrix(vectors=[[1.0, 0.0]], ids=[0])
        with pytest.raises(ValueError):
            matrix.vectors[0, 0] = 5.0

    def test_non_finite_rejected(self):
        with pytest.raises(Exception, match="non-finite"):
            EmbeddingMatrix(vectors=[[np.nan, 0.0]], ids=[0])
