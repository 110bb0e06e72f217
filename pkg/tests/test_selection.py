import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from halodeconv.pipeline import checkerboard, one_se_choice


def _trials(rng, means, n=4000, noise=1.0):
    """Per-pixel scores sharing one noise draw, shifted by ``means``."""
    base = rng.chisquare(1, n) * noise
    return [base + m for m in means]


def _zero_mean(rng, n):
    e = rng.normal(0.0, 0.05, n)
    return e - e.mean()


def test_equivalent_fits_pick_strongest(rng):
    grid = [0.01, 0.1, 1.0, 10.0]
    chis = _trials(rng, [0.0, 0.0, 0.5, 2.0])
    chis[1] = chis[1] + _zero_mean(rng, chis[1].size)
    k, scores, errors = one_se_choice(grid, chis)
    assert k == 1
    assert errors[int(np.argmin(scores))] == 0.0


def test_clear_minimum_is_kept(rng):
    k, _, _ = one_se_choice([0.1, 1.0, 10.0], _trials(rng, [1.0, 0.0, 2.0]))
    assert k == 1


def test_grid_order_does_not_matter(rng):
    chis = _trials(rng, [0.0, 0.0, 0.5])
    chis[1] = chis[1] + _zero_mean(rng, chis[1].size)
    k1, _, _ = one_se_choice([0.1, 1.0, 10.0], chis)
    k2, _, _ = one_se_choice([10.0, 1.0, 0.1], chis[::-1])
    assert (k1, k2) == (1, 1)


def test_paired_error_ignores_shared_noise(rng):
    # a constant offset shared by every pixel has zero paired error
    _, _, errors = one_se_choice([1.0, 10.0], _trials(rng, [0.0, 1e-3]))
    assert errors == pytest.approx([0.0, 0.0], abs=1e-12)


def test_checkerboard_halves():
    cb = checkerboard((5, 4))
    assert cb.sum() == 10
    assert not (cb[:, 1:] & cb[:, :-1]).any()


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
def test_choice_within_one_error_and_maximal(n, seed):
    rng = np.random.default_rng(seed)
    chis = [rng.chisquare(1, 200) for _ in range(n)]
    grid = list(10.0 ** np.arange(n))
    k, scores, errors = one_se_choice(grid, chis)
    best = int(np.argmin(scores))
    assert scores[k] <= scores[best] + errors[k]
    assert all(scores[j] > scores[best] + errors[j] for j in range(k + 1, n))
