import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardkernels.losses import (
    LossSpec,
    eval_loss,
    gap_term,
    block_gap_bound,
    u_star,
    u_star_numeric,
)

LOSSES = ["absolute", "hinge", "squared", "linear"]


def test_loss_values():
    assert eval_loss("absolute", 0.3, 1.0) == pytest.approx(0.7)
    assert eval_loss("squared", 3.0, 1.0) == 4.0
    assert eval_loss("hinge", 0.25, 1.0) == 0.75
    assert eval_loss("hinge", 2.0, 1.0) == 0.0
    assert eval_loss("linear", 2.0, -1.5) == -3.0
    assert LossSpec("absolute").nonnegative
    assert not LossSpec("linear").nonnegative


def test_bad_inputs():
    with pytest.raises(ValueError):
        LossSpec("logistic")
    with pytest.raises(ValueError):
        eval_loss("hinge", 0.0, 0.5)
    with pytest.raises(ValueError):
        u_star("squared", 1.0, 0.0)


@given(st.sampled_from(LOSSES), st.floats(-3, 3), st.floats(0.05, 20))
@settings(max_examples=300, deadline=None)
def test_closed_form_matches_search(loss, y, a):
    if loss == "hinge":
        y = 1.0 if y >= 0 else -1.0
    assert abs(u_star(loss, y, a) - u_star_numeric(loss, y, a)) <= 1e-6


@given(st.sampled_from(LOSSES), st.floats(-3, 3), st.floats(0.05, 20), st.floats(-5, 5))
@settings(max_examples=200, deadline=None)
def test_minimizer_beats_any_point(loss, y, a, u):
    if loss == "hinge":
        y = 1.0 if y >= 0 else -1.0
    best = u_star(loss, y, a)
    f = lambda v: eval_loss(loss, v, y) + a * v * v
    assert f(best) <= f(u) + 1e-12


@pytest.mark.parametrize("a", [0.01, 0.1, 0.25, 0.5])
def test_hinge_plateau(a):
    assert u_star("hinge", 1.0, a) == 1.0
    assert u_star("hinge", -1.0, a) == -1.0


def test_hinge_leaves_plateau_above_half():
    # the minimizer is 1/(2a) once a > 1/2, e.g. a = 1 gives 1/2
    assert u_star("hinge", 1.0, 1.0) == 0.5
    assert u_star_numeric("hinge", 1.0, 1.0) == pytest.approx(0.5, abs=1e-9)


@pytest.mark.parametrize("lam_d", [0.05, 0.3, 1.0, 4.0])
@pytest.mark.parametrize("p", [0.5, 1.0, 2.0])
def test_anchor_values(lam_d, p):
    a = p * lam_d
    assert u_star("squared", 1.0, a) == pytest.approx(1 / (1 + a), rel=1e-15)
    assert u_star("absolute", 1 / (2 * a), a) == pytest.approx(1 / (2 * a), rel=1e-15)
    assert u_star("linear", 0.4, a) == pytest.approx(-0.4 / (2 * a), rel=1e-15)


def test_vectorized():
    ys = np.array([-1.0, 0.2, 3.0])
    out = u_star("absolute", ys, 0.5)
    assert out.shape == (3,)
    assert np.allclose(out, [-1.0, 0.2, 1.0])


@given(st.sampled_from(["absolute", "squared", "linear"]), st.floats(0.01, 2), st.floats(0.01, 10))
@settings(max_examples=200, deadline=None)
def test_gap_term_non_increasing(loss, y, a):
    assert gap_term(loss, y, 1.5 * a) <= gap_term(loss, y, a) + 1e-12


def test_gap_bound_absolute_constant():
    lam, d = 0.01, 50
    y = 1 / (4 * lam * d)
    b = block_gap_bound("absolute", lam, d, [y])
    assert b.analytic_value == pytest.approx(1 / (960 * lam * d), rel=1e-12)
    assert b.grid_value == pytest.approx(b.analytic_value, rel=1e-9)
    # flat in p here: u1 = u2 = y on the whole range


def test_gap_bound_hinge_small_lam_d():
    lam, d = 0.0025, 100
    b = block_gap_bound("hinge", lam, d, [1.0])
    assert b.analytic_value == pytest.approx(lam * d / 60)


def test_gap_bound_hinge_vanishes_at_half():
    # at lam*d = 1/2 the worst p = 2 gives 2 u1 - u2 = 0
    b = block_gap_bound("hinge", 0.005, 100, [1.0, -1.0])
    assert b.analytic_value == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("lam_d", [0.1, 1.0, 3.0, 6.0])
def test_gap_bound_squared_floor(lam_d):
    b = block_gap_bound("squared", lam_d / 10, 10, [1.0])
    assert b.analytic_value >= lam_d / (60 * (1 + 2 * lam_d) ** 4)


def test_gap_bound_linear_zero():
    b = block_gap_bound("linear", 0.1, 10, [1.0, -2.0])
    assert b.analytic_value == 0.0


@given(st.sampled_from(LOSSES), st.floats(1e-3, 0.5), st.integers(1, 200))
@settings(max_examples=60, deadline=None)
def test_grid_never_below_exact(loss, lam, d):
    ys = [1.0, -1.0] if loss == "hinge" else [0.3, 1.0]
    b = block_gap_bound(loss, lam, d, ys, p_grid=65)
    assert b.grid_value >= b.analytic_value - 1e-15
    assert math.isfinite(b.grid_value)
