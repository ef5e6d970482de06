import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hrlab.lemmas import DEFAULT_SEED, _taylor_defect, estimate_gamma_p, fuzz_lemmas, sample_pairs


@pytest.mark.parametrize("p", [1.1, 1.5, 1.9, 2.0, 2.5, 6.0])
def test_no_violations_on_small_samples(p):
    checks = fuzz_lemmas(p, 20_000, seed=7)
    assert checks and all(c.ok for c in checks), [c for c in checks if not c.ok]
    assert all(c.samples == 20_000 for c in checks)


def test_lemma_sets_depend_on_the_exponent():
    names = lambda p: {c.lemma for c in fuzz_lemmas(p, 100)}
    assert "taylor_upper_p_lt_2" in names(1.5) and "taylor_upper_p_ge_2" in names(3.0)
    assert "subadditive_s=p/2" in names(1.5) and "subadditive_s=p/2" not in names(3.0)


def _gamma_cartesian_oracle(p):
    # sup over a in a Cartesian window, b = e1; independent of the log-polar search
    xs = np.linspace(-4.0, 2.0, 1201)
    ys = np.linspace(0.0, 3.0, 601)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    a = np.stack([X, Y], axis=-1)
    b = np.broadcast_to([1.0, 0.0], a.shape)
    return float(_taylor_defect(a, b, p)[0].max())


@pytest.mark.parametrize("p", [1.3, 1.5, 1.8])
def test_gamma_estimate_against_grid_oracle(p):
    raw = estimate_gamma_p(p, headroom=0.0)
    oracle = _gamma_cartesian_oracle(p)
    assert oracle <= raw * (1 + 1e-9)
    assert raw == pytest.approx(oracle, rel=2e-3)


def test_gamma_frozen_values_and_limit():
    assert estimate_gamma_p(1.5, headroom=0.0) == pytest.approx(1.3065629648763766, rel=1e-9)
    assert estimate_gamma_p(1.5) == pytest.approx(1.05 * 1.3065629648763766, rel=1e-9)
    assert estimate_gamma_p(1.99, headroom=0.0) == pytest.approx(1.0, abs=0.01)
    with pytest.raises(ValueError):
        estimate_gamma_p(2.0)


def test_random_samples_stay_below_gamma():
    p = 1.5
    rng = np.random.default_rng(3)
    a, b = sample_pairs(200_000, rng, 2)
    na, nb = np.linalg.norm(a, axis=1), np.linalg.norm(b, axis=1)
    # beyond |a|/|b| ~ 1e3 the defect is pure cancellation noise
    keep = (nb > 0) & (na < 1e3 * nb)
    ratio = _taylor_defect(a[keep], b[keep], p)[0] / nb[keep] ** p
    raw = estimate_gamma_p(p, headroom=0.0)
    assert 0.5 * raw < ratio.max() <= raw * (1 + 1e-9)


def test_seeded_runs_are_reproducible():
    a = fuzz_lemmas(3.0, 5000)
    b = fuzz_lemmas(3.0, 5000, seed=DEFAULT_SEED)
    assert [(c.lemma, c.worst_excess) for c in a] == [(c.lemma, c.worst_excess) for c in b]
    c = fuzz_lemmas(3.0, 5000, seed=1)
    assert [x.worst_excess for x in a] != [x.worst_excess for x in c]


def test_sample_mix():
    rng = np.random.default_rng(0)
    a, b = sample_pairs(50_000, rng, 3)
    na, nb = np.linalg.norm(a, axis=1), np.linalg.norm(b, axis=1)
    assert 0.005 < np.mean(na == 0) < 0.015 and 0.005 < np.mean(nb == 0) < 0.015
    both = (na > 0) & (nb > 0)
    cos = np.abs(np.sum(a * b, axis=1)[both]) / (na * nb)[both]
    assert 0.15 < np.mean(cos > 1 - 1e-12) < 0.25
    assert na.max() > 1e5 and na[na > 0].min() < 1e-5


def test_argument_validation():
    with pytest.raises(ValueError):
        fuzz_lemmas(2.0, 0)
    with pytest.raises(ValueError):
        fuzz_lemmas(1.0, 10)


@given(p=st.floats(1.05, 8.0), seed=st.integers(0, 2 ** 32 - 1))
def test_fuzz_never_finds_violations(p, seed):
    assert all(c.ok for c in fuzz_lemmas(p, 2000, seed))
