"""One test per acceptance criterion; each records a PASS/FAIL summary line."""
import math
import time

import numpy as np
from hypothesis import given, settings, strategies as st

import oracles
from mixedbounds import experiments as ex
from mixedbounds.assemble import (boundary_trace_matrix, cell_averages, div_matrix, facet_mass,
                                  p0_mass, rt0_interpolant, rt0_mass, square_fig3_coefficients)
from mixedbounds.bounds import cdiv_bound, korn_bound, lb_transform, lb_transform_shifted
from mixedbounds.mesh import Mesh, builtin_mesh, format_mesh, parse_mesh, refine, refine_red
from mixedbounds.spectra import (SolveOptions, a_project_field, discrete_gradient,
                                 mixed_eigs_scalar, steklov_eigs)

# endpoint values quoted alongside the criteria, frozen independently of the shipped CSVs
ENDPOINTS = {
    "laplace-lshape": [(0, "lambda_h", 8.60144), (0, "lower", 5.99088),
                       (4, "lambda_h", 9.61746), (4, "lower", 9.59919)],
    "elliptic-square": [(0, "lambda_h", 13.4656), (0, "lower", 10.3977),
                        (4, "lambda_h", 13.3873), (4, "lower", 13.3699)],
    "steklov-lshape": [(0, "lambda_h", 0.340304), (0, "lower", 0.188241)],
}
STEKLOV_DELTA_SQ_LEVEL0 = 2.37378


def _table_check(problem, rtol):
    ref = ex.load_reference(problem)
    start = time.perf_counter()
    reports = ex.run(ex.ExperimentConfig(problem, levels=len(ref.rows)))
    elapsed = time.perf_counter() - start
    report = ex.verify(ref, reports, rtol)
    worst = {col: max(c.rel_error for c in report.checks if c.column == col) for col in rtol}
    endpoints_ok = all(
        abs(getattr(reports[row], col) - val) <= rtol[col] * abs(val)
        for row, col, val in ENDPOINTS.get(problem, []))
    return reports, report, worst, endpoints_ok, elapsed


def _fmt_worst(worst):
    return ", ".join(f"{k} max rel {v:.1e}" for k, v in worst.items())


def test_criterion_1_laplace_lshape(acceptance):
    rtol = {"lambda_h": 2e-5, "lower": 2e-5, "upper": 1e-3}
    _, report, worst, endpoints_ok, elapsed = _table_check("laplace-lshape", rtol)
    ok = report.passed and endpoints_ok and elapsed < 120
    acceptance(1, ok, f"Laplace L-shape levels 0-4, {_fmt_worst(worst)}, {elapsed:.1f} s")
    assert ok, report.summary()


def test_criterion_2_elliptic_square(acceptance):
    rtol = {"lambda_h": 2e-5, "lower": 2e-5, "upper": 1e-3}
    reports, report, worst, endpoints_ok, _ = _table_check("elliptic-square", rtol)
    shifted_used = all(r.gamma0 == 4.0 and r.lower == lb_transform_shifted(r.lambda_h, r.delta_sq, 4.0)
                       for r in reports)
    ok = report.passed and endpoints_ok and shifted_used
    acceptance(2, ok, f"elliptic square with shift, {_fmt_worst(worst)}")
    assert ok, report.summary()


def test_criterion_3_steklov_lshape(acceptance):
    rtol = {"lambda_h": 2e-5, "lower": 2e-5}
    reports, report, worst, endpoints_ok, _ = _table_check("steklov-lshape", rtol)
    ref = ex.load_reference("steklov-lshape")
    # delta^2 = 1/lower - 1/lambda inherits the column tolerance 2e-5 of both terms
    dsq_ok, printed_ok, dsq_err, printed_err = True, True, 0.0, 0.0
    for k, (r, (_, lam, lo, _)) in enumerate(zip(reports, ref.rows)):
        target = STEKLOV_DELTA_SQ_LEVEL0 * 2.0 ** -k
        tol = 2e-5 * (1 / lo + 1 / lam)
        dsq_ok &= abs(r.delta_sq - target) <= tol
        printed_ok &= abs((1 / lo - 1 / lam) - target) <= tol
        dsq_err = max(dsq_err, abs(r.delta_sq - target) / target)
        printed_err = max(printed_err, abs((1 / lo - 1 / lam) - target) / target)
    ok = report.passed and endpoints_ok and dsq_ok and printed_ok
    acceptance(3, ok, f"Steklov L-shape, {_fmt_worst(worst)}, delta^2 vs 2.37378*2^-k rel {dsq_err:.1e} "
                      f"(reference columns imply rel {printed_err:.1e})")
    assert ok, report.summary()


def test_criterion_4_elasticity_cook(acceptance):
    rtol = {"lower": 1e-2, "upper": 5e-2}
    ref = ex.load_reference("elasticity-cook-bounds")
    reports = ex.run(ex.ExperimentConfig("elasticity-cook-bounds", levels=len(ref.rows)))
    report = ex.verify(ref, reports, rtol)
    worst = {col: max(c.rel_error for c in report.checks if c.column == col) for col in rtol}
    uses_reference = all(r.lambda_h == row[1] for r, row in zip(reports, ref.rows))
    ok = report.passed and uses_reference
    acceptance(4, ok, f"Cook membrane from reference lambda_h, {_fmt_worst(worst)}")
    assert ok, report.summary()


def test_criterion_5_constants(acceptance):
    d = 1 / math.sqrt(4 + 2 * math.sqrt(2))
    cdiv, korn = cdiv_bound(d), korn_bound(d)
    ds = np.random.default_rng(7).uniform(1e-3, 1.0, 100)
    identity = max(abs(korn_bound(x) ** 2 - (1 + 2 * cdiv_bound(x) ** 2)) / korn_bound(x) ** 2 for x in ds)
    ok = abs(cdiv - 5.1259) <= 5e-4 and abs(korn - 7.318) <= 5e-4 and identity <= 1e-14
    acceptance(5, ok, f"cdiv {cdiv:.5f}, korn {korn:.5f}, C_K^2 = 1 + 2 C_div^2 rel {identity:.1e}")
    assert ok


def _facet_bubble(m):
    """Product of the distinct boundary facet lines; zero on the whole mesh boundary."""
    lines = set()
    scale = m.h()
    for a, b in m.points[m.boundary]:
        t = (b - a) / np.hypot(*(b - a))
        n = np.array([t[1], -t[0]])
        lines.add((n[0] / scale, n[1] / scale, -(n @ a) / scale))
    lines = [np.array(line) for line in sorted(lines)]

    def u(x, y):
        return np.prod([p[0] * x + p[1] * y + p[2] for p in lines], axis=0)

    def grad(x, y):
        vals = [p[0] * x + p[1] * y + p[2] for p in lines]
        gx, gy = 0.0, 0.0
        for k, p in enumerate(lines):
            rest = np.prod([v for j, v in enumerate(vals) if j != k], axis=0)
            gx, gy = gx + p[0] * rest, gy + p[1] * rest
        return gx, gy
    return u, grad, len(lines)


def test_criterion_6_commutation(acceptance):
    worst = 0.0
    for name in ("lshape_fig1", "square_fig3", "cook_fig4"):
        m = builtin_mesh(name)
        u, grad, degree = _facet_bubble(m)
        for level in range(3):
            if level:
                m = refine_red(m)
            lhs = discrete_gradient(m, None, cell_averages(m, u, degree=degree))
            rhs = a_project_field(m, None, grad, quad_degree=degree)
            worst = max(worst, np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs))
    ok = worst <= 1e-10
    acceptance(6, ok, f"G_h P_h u = projection of grad u on 3 meshes x 3 levels, max rel {worst:.1e}")
    assert ok


def test_criterion_7_dense_saddle_oracle(acceptance):
    opts = SolveOptions(J=3)
    worst, sizes = 0.0, []
    for name in ("lshape_fig1", "square_fig3", "cook_fig4"):
        m = builtin_mesh(name)
        c = square_fig3_coefficients(m) if name == "square_fig3" else None
        gamma = c.gamma if c is not None else 0.0
        sizes.append(m.n_edges + m.n_cells)
        ref = oracles.mixed_saddle_eigenvalues(rt0_mass(m, c), div_matrix(m), p0_mass(m, gamma),
                                               p0_mass(m), 3)
        got = mixed_eigs_scalar(m, c, opts).eigenvalues
        worst = max(worst, np.max(np.abs(got - ref) / ref))
    for m in (builtin_mesh("lshape_fig1", steklov=True), builtin_mesh("square_fig3").relabel("steklov")):
        sizes.append(m.n_edges + m.n_cells + len(m.boundary))
        ref = oracles.steklov_saddle_eigenvalues(rt0_mass(m), div_matrix(m), p0_mass(m),
                                                 boundary_trace_matrix(m, "steklov"),
                                                 facet_mass(m, "steklov"), 3)
        got = steklov_eigs(m, opts).eigenvalues
        worst = max(worst, np.max(np.abs(got - ref) / ref))
    ok = worst <= 1e-8 and max(sizes) <= 200
    acceptance(7, ok, f"drivers vs dense saddle eig, dofs {sizes}, max rel {worst:.1e}")
    assert ok


def test_criterion_8_properties(acceptance):
    failures = []

    @settings(max_examples=200, deadline=None)
    @given(st.floats(1e-6, 1e6), st.floats(1e-6, 1e6), st.floats(1e-8, 1e2), st.floats(0, 1))
    def transforms(a, b, d, frac):
        lo, hi = sorted((a, b))
        assert lb_transform(lo, d) <= lb_transform(hi, d)
        assert lb_transform(hi, d) < 1 / d
        assert lb_transform_shifted(hi, d, frac * hi) >= lb_transform(hi, d) * (1 - 1e-12)

    for name, check in (("lb_transform monotone, saturating, dominated by shift", transforms),):
        try:
            check()
        except AssertionError as exc:
            failures.append(f"{name}: {exc}")

    for name in ("lshape_fig1", "square_fig3", "cook_fig4"):
        m = refine(builtin_mesh(name), 2)
        if not parse_mesh(format_mesh(m)).same_as(m):
            failures.append(f"round trip {name}")
        base = builtin_mesh(name).areas().sum()
        if abs(m.areas().sum() - base) > 1e-13 * base:
            failures.append(f"area conservation {name}")
        field = lambda x, y: (x * x + y, 2 * x * y - y * y)  # noqa: E731
        flux = div_matrix(m) @ rt0_interpolant(m, field)
        exact = cell_averages(m, lambda x, y: 2 * x + 2 * x - 2 * y, degree=2) * m.areas()
        if np.abs(flux - exact).max() > 1e-11 * np.abs(exact).max():
            failures.append(f"flux identity {name}")

    tri = Mesh([[0, 0], [2, 0], [0, 1]], [[0, 1, 2]], [0], [[0, 1], [1, 2], [2, 0]], ("steklov",) * 3)
    if abs(div_matrix(tri).sum(axis=0) @ rt0_interpolant(tri, lambda x, y: (x, y)) - 2 * 1.0) > 1e-14:
        failures.append("flux identity single triangle")

    ok = not failures
    acceptance(8, ok, "property suite" + (": " + "; ".join(failures) if failures else " all hold"))
    assert ok, failures
