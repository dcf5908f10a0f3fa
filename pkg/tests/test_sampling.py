"""Wishart/Haar samplers and the composition walk."""

import math

import numpy as np
import pytest
from scipy.special import gammainc

from spdwalk import (
    RngStream,
    WishartParams,
    generate_walk,
    haar_orthogonal,
    make_spd,
    sample_stats_batch,
    walk_statistics,
    wishart_sample,
)
from spdwalk.sampling import batch_statistics, sample_walk_batch, walk_from_jsonl, walk_to_jsonl

from helpers import one_sample_ks


class TestWishart:
    def test_scalar_matches_chi_squared(self):
        # m=1 reduces to chi-squared with 2a degrees of freedom
        a = 2.0
        draws = wishart_sample(WishartParams(1, a), RngStream(101), size=100_000)[:, 0, 0]
        _, p = one_sample_ks(draws, lambda x: gammainc(a, 0.5 * x))
        assert p > 0.01

    def test_mean_matches_first_moment(self):
        params = WishartParams(2, 2.0)
        x = wishart_sample(params, RngStream(7), size=100_000)
        mean = x.mean(axis=0)
        se = x.std(axis=0, ddof=1) / math.sqrt(x.shape[0])
        assert (np.abs(mean - 2.0 * params.a * np.eye(2)) <= 3.0 * se).all()

    def test_draws_are_spd(self):
        params = WishartParams(3, 2.5)
        x = wishart_sample(params, RngStream(5), size=200)
        assert (np.linalg.det(x) > 0).all()
        for mat in x[:20]:
            make_spd(mat)

    def test_parameter_domain(self):
        with pytest.raises(ValueError):
            WishartParams(3, 1.0)  # needs a > 1
        with pytest.raises(ValueError):
            WishartParams(0, 1.0)


class TestHaar:
    def test_orthogonality(self):
        q = haar_orthogonal(4, RngStream(1))
        assert np.abs(q.T @ q - np.eye(4)).max() <= 1e-10

    def test_dimension_one_is_fair_sign(self):
        q = haar_orthogonal(1, RngStream(2), size=100_000)[:, 0, 0]
        freq = (q > 0).mean()
        sigma = math.sqrt(0.25 / q.size)
        assert abs(freq - 0.5) <= 3.0 * sigma
        assert set(np.unique(np.abs(q))) == {1.0}

    def test_first_column_sphere_symmetry(self):
        q = haar_orthogonal(3, RngStream(3), size=100_000)
        col = q[:, :, 0]
        se = col.std(axis=0, ddof=1) / math.sqrt(col.shape[0])
        assert (np.abs(col.mean(axis=0)) <= 3.0 * se).all()


class TestWalk:
    def test_first_partial_is_first_step(self):
        path = generate_walk(WishartParams(2, 2.0), 1, RngStream(11))
        assert np.array_equal(path.partials[0], path.steps[0])

    def test_scalar_walk_is_plain_product(self):
        path = generate_walk(WishartParams(1, 1.5), 6, RngStream(12))
        prod = np.prod(path.steps[:, 0, 0])
        final = path.partials[-1, 0, 0]
        assert abs(final - prod) <= 1e-12 * abs(prod)

    def test_determinant_multiplicativity(self):
        path = generate_walk(WishartParams(3, 3.0), 8, RngStream(13))
        want = np.prod(np.linalg.det(path.steps))
        got = np.linalg.det(path.partials[-1])
        assert abs(got - want) <= 1e-8 * abs(want)

    def test_reproducible_bit_exact(self):
        a = generate_walk(WishartParams(2, 2.0), 5, RngStream(99, 3))
        b = generate_walk(WishartParams(2, 2.0), 5, RngStream(99, 3))
        assert np.array_equal(a.steps, b.steps)
        assert np.array_equal(a.partials, b.partials)

    def test_prefix_stability_and_monotone_stats(self):
        params = WishartParams(2, 2.0)
        short = generate_walk(params, 4, RngStream(21))
        long = generate_walk(params, 7, RngStream(21))
        assert np.array_equal(long.steps[:4], short.steps)
        s_short = walk_statistics(short)
        s_long = walk_statistics(long)
        assert s_long.max_step_dist >= s_short.max_step_dist
        assert s_long.max_partial_dist >= s_short.max_partial_dist

    def test_length_validation(self):
        with pytest.raises(ValueError):
            generate_walk(WishartParams(2, 2.0), 0, RngStream(1))


class TestWalkStats:
    def test_single_step(self):
        path = generate_walk(WishartParams(2, 2.0), 1, RngStream(31))
        stats = walk_statistics(path)
        assert stats.max_step_dist == stats.max_partial_dist
        assert stats.max_step_dist == stats.step_dists[0]

    def test_identity_path(self):
        params = WishartParams(2, 2.0)
        eye = np.broadcast_to(np.eye(2), (3, 2, 2)).copy()
        from spdwalk.sampling import WalkPath

        stats = walk_statistics(WalkPath(params=params, steps=eye, partials=eye))
        assert stats.max_step_dist == 0.0
        assert stats.max_partial_dist == 0.0

    def test_order_stats_sorted_max(self):
        path = generate_walk(WishartParams(3, 3.0), 6, RngStream(41))
        stats = walk_statistics(path)
        assert (np.diff(stats.order_stats) >= 0).all()
        assert stats.order_stats[-1] == stats.max_step_dist
        assert set(stats.order_stats) == set(stats.step_dists)


class TestEnsembles:
    def test_batch_matches_per_path_formulas(self):
        params = WishartParams(2, 2.5)
        batch = sample_walk_batch(params, 4, 50, RngStream(55))
        stats = batch_statistics(batch)
        for i in range(0, 50, 7):
            from spdwalk.sampling import WalkPath

            per = walk_statistics(
                WalkPath(params=params, steps=batch.steps[i], partials=batch.partials[i])
            )
            assert np.allclose(per.step_dists, stats.step_dists[i], atol=0, rtol=0)
            assert per.max_partial_dist == stats.max_partial_dist[i]

    def test_chunked_stats_deterministic_across_threads(self):
        params = WishartParams(2, 2.0)
        one = sample_stats_batch(params, 3, 25_000, RngStream(66), chunk_size=4_000, threads=1)
        four = sample_stats_batch(params, 3, 25_000, RngStream(66), chunk_size=4_000, threads=4)
        assert np.array_equal(one.max_partial_dist, four.max_partial_dist)
        assert np.array_equal(one.step_dists, four.step_dists)


class TestWalkDump:
    def test_jsonl_roundtrip(self):
        stream = RngStream(123, 4)
        path = generate_walk(WishartParams(2, 2.0), 3, stream)
        line = walk_to_jsonl(path, stream)
        back, back_stream = walk_from_jsonl(line)
        assert back_stream == stream
        assert np.array_equal(back.steps, path.steps)
        assert np.array_equal(back.partials, path.partials)
