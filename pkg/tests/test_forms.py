import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_config
from pointineq import (
    InputError,
    NumericalError,
    SimilarityMap,
    ZeroWeightsError,
    apply_similarity,
    eval_forms,
    i1_matrix_form,
    i1_rewrite_form,
    interaction_gradient,
    interaction_matrix,
    make_config,
    ratio_quotient,
    ratio_subgradient,
)
from pointineq import forms

seeds = st.integers(0, 2**32 - 1)


def loop_forms(x, u):
    """Plain double loops over the definitions, used as an independent oracle."""
    p = len(x)
    i1_sq = 0.0
    sup = 0.0
    i2 = 0.0
    for i in range(p):
        s = 0.0
        vec = np.zeros(x.shape[1])
        for j in range(p):
            if i == j:
                continue
            r = np.linalg.norm(x[i] - x[j])
            s += u[j] / r
            vec += (x[i] - x[j]) / r**3 * u[j]
            i2 += u[j] ** 2 / r**2
        i1_sq += s * s
        sup = max(sup, abs(u[i]) * np.linalg.norm(vec))
    return i1_sq + 2 * sup, i2


def test_equilateral_closed_form():
    c = make_config([[0, 0], [1, 0], [0.5, np.sqrt(3) / 2]])
    ev = eval_forms(c, [1, 1, 1], check=True)
    assert ev.i1 == pytest.approx(12 + 2 * np.sqrt(3), rel=1e-14)
    assert ev.i2 == pytest.approx(6.0, rel=1e-15)
    assert ev.ratio == pytest.approx(2 + np.sqrt(3) / 3, rel=1e-14)
    assert 1 <= ev.sup_index <= 3


def test_two_points_unit_weights():
    ev = eval_forms(make_config([[0.0], [1.0]]), [1.0, 1.0])
    assert (ev.i1, ev.i2, ev.ratio) == (4.0, 2.0, 2.0)


def test_interaction_matrix_entries():
    a = interaction_matrix(make_config([[0.0, 0.0], [3.0, 4.0], [0.0, 1.0]]))
    np.testing.assert_allclose(a, [[0, 0.2, 1], [0.2, 0, 1 / np.sqrt(18)], [1, 1 / np.sqrt(18), 0]], rtol=1e-15)


def test_zero_weights_rejected():
    with pytest.raises(ZeroWeightsError):
        eval_forms(make_config([[0.0], [1.0]]), [0.0, 0.0])


def test_wrong_length_rejected():
    with pytest.raises(InputError):
        eval_forms(make_config([[0.0], [1.0]]), [1.0, 2.0, 3.0])


def test_check_reports_disagreement(monkeypatch):
    monkeypatch.setattr(forms, "i1_matrix_form", lambda c, u: 1.0)
    with pytest.raises(NumericalError):
        eval_forms(make_config([[0.0], [1.0]]), [1.0, 1.0], check=True)


@given(seeds, st.integers(2, 7), st.integers(1, 3))
@settings(max_examples=60, deadline=None)
def test_matches_loop_oracle(seed, p, m):
    rng = np.random.default_rng(seed)
    c = random_config(rng, p, m)
    u = rng.normal(size=p)
    ev = eval_forms(c, u)
    i1, i2 = loop_forms(c.points, u)
    assert ev.i1 == pytest.approx(i1, rel=1e-12)
    assert ev.i2 == pytest.approx(i2, rel=1e-12)
    assert i1_matrix_form(c, u) == pytest.approx(i1_rewrite_form(c, u), rel=1e-12)


@given(seeds, st.integers(2, 6), st.integers(1, 3))
@settings(max_examples=40, deadline=None)
def test_ratio_homogeneity(seed, p, m):
    rng = np.random.default_rng(seed)
    c = random_config(rng, p, m)
    u = rng.normal(size=p)
    r = eval_forms(c, u).ratio
    assert eval_forms(c, -3.7 * u).ratio == pytest.approx(r, rel=1e-12)
    assert eval_forms(make_config(c.points * 5.3), u).ratio == pytest.approx(r, rel=1e-12)


@given(seeds, st.integers(2, 6), st.integers(1, 3))
@settings(max_examples=40, deadline=None)
def test_ratio_similarity_invariant(seed, p, m):
    rng = np.random.default_rng(seed)
    c = random_config(rng, p, m)
    u = rng.normal(size=p)
    moved = apply_similarity(c, SimilarityMap.random(m, rng))
    assert eval_forms(moved, u).ratio == pytest.approx(eval_forms(c, u).ratio, rel=1e-10)


@given(seeds, st.integers(2, 6), st.integers(1, 3))
@settings(max_examples=30, deadline=None)
def test_gradient_against_central_differences(seed, p, m):
    rng = np.random.default_rng(seed)
    c = random_config(rng, p, m)
    g = interaction_gradient(c)
    h = 1e-6 * c.diameter
    for k in range(p):
        for t in range(m):
            xp = c.points.copy()
            xm = c.points.copy()
            xp[k, t] += h
            xm[k, t] -= h
            fd = (interaction_matrix(make_config(xp)) - interaction_matrix(make_config(xm))) / (2 * h)
            scale = np.abs(g[k, :, :, t]).max()
            assert np.abs(fd - g[k, :, :, t]).max() <= 1e-6 * max(scale, 1e-300)


@given(seeds, st.integers(2, 6), st.integers(1, 3))
@settings(max_examples=30, deadline=None)
def test_subgradient_against_central_differences(seed, p, m):
    rng = np.random.default_rng(seed)
    c = random_config(rng, p, m)
    u = rng.normal(size=p)
    hn = np.linalg.norm(ratio_quotient(c).parts(u)[1], axis=1)
    top = np.sort(hn)[::-1]
    if len(top) > 1 and top[0] - top[1] < 1e-3 * top[0]:
        return  # near a kink of the max; the one-sided derivatives differ
    g = ratio_subgradient(c, u)
    h = 1e-6
    fd = np.array([(eval_forms(c, u + h * e).ratio - eval_forms(c, u - h * e).ratio) / (2 * h) for e in np.eye(p)])
    np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-6 * np.abs(fd).max())


def test_subgradient_handles_vanishing_sup():
    # u = (1, 0): every bilinear term is u_i * (...) with the other weight zero
    g = ratio_subgradient(make_config([[0.0], [1.0]]), [1.0, 0.0])
    assert np.all(np.isfinite(g))


def test_softmax_is_an_upper_bound_and_converges():
    c = random_config(np.random.default_rng(5), 5, 2)
    u = np.random.default_rng(6).normal(size=5)
    exact = ratio_quotient(c).exact_value(u)
    loose = ratio_quotient(c, softmax_temperature=1e-1).value(u)
    tight = ratio_quotient(c, softmax_temperature=1e-8).value(u)
    assert loose >= exact
    assert tight == pytest.approx(exact, rel=1e-7)


def test_batched_values_match_scalar():
    c = random_config(np.random.default_rng(9), 4, 3)
    q = ratio_quotient(c)
    zs = np.random.default_rng(10).normal(size=(20, 4))
    np.testing.assert_allclose(q.values(zs), [q.exact_value(z) for z in zs], rtol=1e-13)


def test_subgradient_two_points_axis_weight():
    g = ratio_subgradient(make_config([[0.0], [1.0]]), [1.0, 0.0])
    assert g[0] == 0.0


def test_subgradient_scales_inversely():
    c = random_config(np.random.default_rng(11), 5, 2)
    u = np.random.default_rng(12).normal(size=5)
    np.testing.assert_allclose(ratio_subgradient(c, 4.0 * u), ratio_subgradient(c, u) / 4.0, rtol=1e-12)


def test_u_homogeneity_of_each_side():
    c = random_config(np.random.default_rng(13), 4, 3)
    u = np.random.default_rng(14).normal(size=4)
    base = eval_forms(c, u)
    for t in (0.5, 3.0, 10.0):
        ev = eval_forms(c, t * u)
        assert ev.i1 == pytest.approx(t * t * base.i1, rel=1e-12)
        assert ev.i2 == pytest.approx(t * t * base.i2, rel=1e-12)


def test_interaction_examples():
    np.testing.assert_allclose(
        interaction_matrix(make_config([[0.0], [1.0], [3.0]])), [[0, 1, 1 / 3], [1, 0, 1 / 2], [1 / 3, 1 / 2, 0]], rtol=1e-15
    )
    c = random_config(np.random.default_rng(3), 4, 2)
    np.testing.assert_allclose(interaction_matrix(make_config(3.0 * c.points)), interaction_matrix(c) / 3.0, rtol=1e-15)


def test_gradient_examples():
    g = interaction_gradient(make_config([[0.0], [1.0]]))
    assert g[0, 0, 1, 0] == 1.0
    assert g[1, 0, 1, 0] == -1.0
    g = interaction_gradient(random_config(np.random.default_rng(4), 5, 3))
    for k in range(5):
        for i in range(5):
            for j in range(5):
                if k not in (i, j):
                    assert not np.any(g[k, i, j])
    for i in range(5):
        for j in range(5):
            np.testing.assert_array_equal(g[i, i, j], -g[j, i, j])
