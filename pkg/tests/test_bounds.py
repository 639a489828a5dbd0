import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from mixedbounds.bounds import (J11, assemble_report, cdiv_bound, delta_elasticity,
                                delta_elliptic, delta_laplace, delta_steklov, korn_bound,
                                lb_transform, lb_transform_shifted, trace_const, triangle_korn)
from mixedbounds.mesh import builtin_mesh, refine_red

pos = st.floats(1e-6, 1e6, allow_nan=False)
dsq = st.floats(1e-8, 1e2, allow_nan=False)


@given(pos, pos, dsq)
def test_lb_transform_monotone(a, b, d):
    lo, hi = sorted((a, b))
    assert lb_transform(lo, d) <= lb_transform(hi, d)


@given(pos, dsq)
def test_lb_transform_saturates_below_inverse_delta(lam, d):
    lb = lb_transform(lam, d)
    assert 0 < lb <= lam
    assert lb < 1.0 / d


@given(pos, dsq, st.floats(0, 1, allow_nan=False))
def test_shift_dominates(lam, d, frac):
    gamma0 = frac * lam
    shifted = lb_transform_shifted(lam, d, gamma0)
    assert shifted >= lb_transform(lam, d) * (1 - 1e-12)
    assert gamma0 * (1 - 1e-12) <= shifted <= lam * (1 + 1e-12)


@given(pos, dsq)
def test_zero_shift_reduces_to_plain_transform(lam, d):
    assert lb_transform_shifted(lam, d, 0.0) == pytest.approx(lb_transform(lam, d), rel=1e-14)


def test_transform_edge_cases():
    assert lb_transform(0.0, 1.0) == 0.0
    assert lb_transform(5.0, 0.0) == 5.0
    with pytest.raises(ValueError):
        lb_transform(-1.0, 1.0)
    with pytest.raises(ValueError):
        lb_transform_shifted(3.0, 1.0, 4.0)


def test_delta_laplace_constants():
    assert delta_laplace(1.0).delta_sq == pytest.approx(1 / math.pi ** 2)
    assert delta_laplace(1.0, "bessel").delta_sq == pytest.approx(1 / J11 ** 2)
    assert delta_elliptic(0.5, 2.0).delta_sq == pytest.approx(0.25 / (2 * math.pi ** 2))
    with pytest.raises(ValueError):
        delta_laplace(0.0)
    with pytest.raises(ValueError):
        delta_laplace(1.0, "euler")


def test_bessel_zero():
    from scipy.special import jn_zeros
    assert J11 == pytest.approx(jn_zeros(1, 1)[0], rel=1e-15)


@given(st.floats(1e-3, 1.0, allow_nan=False))
def test_korn_cdiv_identity(d):
    assert korn_bound(d) ** 2 == pytest.approx(1 + 2 * cdiv_bound(d) ** 2, rel=1e-14)


def test_korn_of_equilateral_triangle():
    v = np.array([[0, 0], [1, 0], [0.5, math.sqrt(3) / 2]])
    ck, h, d = triangle_korn(v)
    assert d == pytest.approx(0.5)
    assert h == pytest.approx(1.0)
    assert ck == pytest.approx(math.sqrt(1 + 16 * (1 + math.sqrt(0.75))))


def test_bound_domains():
    for f in (cdiv_bound, korn_bound):
        with pytest.raises(ValueError):
            f(0.0)
        with pytest.raises(ValueError):
            f(1.5)


def test_trace_const_formula():
    # |F| = |T| = h = 1
    assert trace_const(1.0, 1.0, 1.0) == pytest.approx(math.sqrt((2 + 2 * math.pi) / (2 * math.pi ** 2)))
    with pytest.raises(ValueError):
        trace_const(0.0, 1.0, 1.0)


def test_delta_records_reevaluate():
    m = builtin_mesh("lshape_fig1", steklov=True)
    c = builtin_mesh("cook_fig4")
    for b in (delta_laplace(0.3), delta_elliptic(0.3, 2.0), delta_steklov(m),
              delta_steklov(m, facet_measure="exact"), delta_elasticity(c, 1.0),
              delta_elasticity(c, 1.0, coercivity=1.0)):
        assert b.reevaluate() == pytest.approx(b.delta_sq, rel=1e-14)
        assert b.delta == pytest.approx(math.sqrt(b.delta_sq))


def test_delta_steklov_halves_under_refinement():
    m = builtin_mesh("lshape_fig1", steklov=True)
    a = delta_steklov(m).delta_sq
    b = delta_steklov(refine_red(m)).delta_sq
    assert b == pytest.approx(a / 2, rel=1e-13)
    assert delta_steklov(m, facet_measure="exact").delta_sq < a
    with pytest.raises(ValueError):
        delta_steklov(builtin_mesh("lshape_fig1"))


def test_delta_elasticity_coercivity():
    c = builtin_mesh("cook_fig4")
    default = delta_elasticity(c, 1.0)
    weak = delta_elasticity(c, 1.0, coercivity=1.0)
    assert weak.delta_sq == pytest.approx(2 * default.delta_sq)
    assert default.ingredients["coercivity"] == 2.0
    with pytest.raises(ValueError):
        delta_elasticity(c, 1.0, coercivity=3.0)
    with pytest.raises(ValueError):
        delta_elasticity(c, -1.0)


def test_assemble_report():
    rows = [(0.5, 10.0, 11.0), (0.25, 10.5, None)]
    reps = assemble_report(rows, "laplace")
    assert reps[0].lower == pytest.approx(lb_transform(10.0, 0.25 / math.pi ** 2))
    assert reps[1].upper is None
    shifted = assemble_report(rows, "elliptic", gamma0=4.0)
    assert shifted[0].lower == pytest.approx(lb_transform_shifted(10.0, 0.25 / math.pi ** 2, 4.0))
    with pytest.raises(ValueError):
        assemble_report(rows, "steklov")
    with pytest.raises(ValueError):
        assemble_report(rows, "laplace", delta_sq=[1.0])
    with pytest.raises(ValueError):
        assemble_report(rows, "plate")


@given(pos, dsq, st.floats(0.0, 1.0))
def test_shifted_monotone_in_lambda(lam, d, frac):
    gamma0 = frac * lam
    lam2 = lam * 1.5
    assume(lam2 >= gamma0)
    assert lb_transform_shifted(lam2, d, gamma0) >= lb_transform_shifted(lam, d, gamma0) * (1 - 1e-12)
