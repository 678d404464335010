import numpy as np
import pytest

from shearlab.density import (NonCauchyLadder, ResolutionError, _lap_sigma_min_dense, assemble_operator,
                              assemble_rhs, boundary_forcing, build_context, epsilon_extrapolate,
                              lap_sigma_min, operator_norm_h1k, solve_boundary_response, solve_ladder,
                              solve_rung)
from shearlab.flow import VorticitySpec, build_cutoffs, build_flow, build_vorticity

SHORT = (0.1, 0.05, 0.025)
BUMP = VorticitySpec("bump", 0.5, 0.2)


@pytest.fixture(scope="module")
def setup():
    flow = build_flow("perturbed_couette", a=0.05)
    cut = build_cutoffs(1, 0.05, flow)
    vort = build_vorticity(BUMP, flow, 1)
    ctx = build_context(1, flow, cut, ladder=SHORT)
    return flow, cut, vort, ctx


@pytest.fixture(scope="module")
def ladder(setup):
    flow, cut, vort, ctx = setup
    return solve_ladder(ctx, vort, flow, cut, sides=(0,))


def test_couette_operator_vanishes(couette):
    cut = build_cutoffs(1, 0.05, couette)
    ctx = build_context(1, couette, cut, ladder=SHORT)
    g = ctx.rungs[0]
    assert np.all(assemble_operator(1, 0.1, 1, 0.5, g, couette, cut) == 0)


def test_zero_vorticity_gives_zero_rhs(setup):
    flow, cut, _, ctx = setup
    zero = build_vorticity(VorticitySpec("constant", amplitude=0.0), flow, 1)
    g = ctx.rungs[0]
    assert np.all(assemble_rhs(1, 0.1, 1, g.w, g, zero, flow, cut) == 0)


def test_rhs_conjugation(setup):
    flow, cut, vort, ctx = setup
    g = ctx.rungs[1]
    plus = assemble_rhs(1, g.epsilon, 1, g.w, g, vort, flow, cut)
    minus = assemble_rhs(1, g.epsilon, -1, g.w, g, vort, flow, cut)
    assert np.max(np.abs(minus - plus.conj())) <= 1e-14 * np.max(np.abs(plus))


def test_rhs_scalar_and_vector_agree(setup):
    flow, cut, vort, ctx = setup
    g = ctx.rungs[0]
    many = assemble_rhs(1, 0.1, 1, g.w, g, vort, flow, cut)
    one = assemble_rhs(1, 0.1, 1, float(g.w[7]), g, vort, flow, cut)
    assert np.allclose(many[:, 7], one, rtol=0, atol=1e-15)


def test_grid_refines_with_epsilon(setup):
    *_, ctx = setup
    m = [g.points_per_unit for g in ctx.rungs]
    assert m[1] == 2 * m[0] and m[2] == 4 * m[0]
    for g in ctx.rungs:
        assert g.epsilon >= ctx.kappa * g.dv * (1 - 1e-12)


def test_resolution_guard(perturbed):
    cut = build_cutoffs(1, 0.05, perturbed)
    with pytest.raises(ResolutionError):
        build_context(1, perturbed, cut, ladder=SHORT, base_points=8)
    with pytest.raises(ValueError):
        build_context(1, perturbed, cut, ladder=(0.05, 0.1, 0.01))
    with pytest.raises(ValueError):
        build_context(1, perturbed, cut, ladder=SHORT, kappa=2.0)


def test_solve_residuals_small(ladder):
    for fld in ladder.plus + ladder.minus:
        assert np.max(fld.residual) <= 1e-10
        assert np.min(fld.rcond) > 1e-6


def test_conjugation_between_signs(ladder):
    for fm, fp in zip(ladder.minus, ladder.plus):
        assert np.max(np.abs(fm.theta - fp.theta.conj())) <= 1e-12 * np.max(np.abs(fp.theta))


def test_couette_density_equals_rhs(couette):
    cut = build_cutoffs(1, 0.05, couette)
    vort = build_vorticity(BUMP, couette, 1)
    ctx = build_context(1, couette, cut, ladder=SHORT)
    fld, (phi,) = solve_rung(ctx, 0, vort, couette, cut, sides=(0,))
    g = ctx.rungs[0]
    assert np.array_equal(fld.theta, assemble_rhs(1, g.epsilon, 1, g.w, g, vort, couette, cut))
    assert np.allclose(phi.phi, boundary_forcing(1, g, cut, 0)[:, None])


def test_perturbation_is_first_order_in_amplitude():
    norms = []
    for a in (0.02, 0.04):
        flow = build_flow("perturbed_couette", a=a)
        cut = build_cutoffs(1, 0.05, flow)
        g = build_context(1, flow, cut, ladder=SHORT).rungs[0]
        norms.append(operator_norm_h1k(1, 0.1, 0.5, g, flow, cut))
    assert norms[1] / norms[0] == pytest.approx(2.0, rel=0.1)


def test_operator_norm_decays_in_k(perturbed):
    vals = []
    for k in (1, 4):
        cut = build_cutoffs(k, 0.05, perturbed)
        g = build_context(k, perturbed, cut, ladder=SHORT).rungs[0]
        vals.append(operator_norm_h1k(k, 0.1, 0.5, g, perturbed, cut))
    assert vals[1] < vals[0]


def test_lap_sigma_couette_is_one(couette):
    cut = build_cutoffs(1, 0.05, couette)
    g = build_context(1, couette, cut, ladder=SHORT).rungs[0]
    assert np.all(lap_sigma_min(1, 0.1, g.w, g, couette, cut) == 1.0)


def test_lap_sigma_low_rank_matches_dense(setup):
    flow, cut, _, ctx = setup
    g = ctx.rungs[0]
    for w in (0.2, 0.5, 0.71):
        fast = lap_sigma_min(1, g.epsilon, w, g, flow, cut)
        assert fast == pytest.approx(_lap_sigma_min_dense(1, g.epsilon, w, g, flow, cut), abs=1e-12)
        assert 0 < fast <= 1


def test_lap_sigma_far_column_near_one(setup):
    flow, cut, _, ctx = setup
    g = ctx.rungs[0]
    assert abs(lap_sigma_min(1, g.epsilon, 40.0, g, flow, cut) - 1) < 1e-2


def test_boundary_response_shapes(setup):
    flow, cut, _, ctx = setup
    phi = solve_boundary_response(ctx, flow, cut, side=1)
    assert phi.phi.shape == (ctx.rungs[-1].y.size, ctx.rungs[-1].w.size)
    assert phi.phi1 is phi.phi and phi.phi0 is None
    assert np.max(phi.residual) < 1e-10
    with pytest.raises(ValueError):
        solve_boundary_response(ctx, flow, cut, side=2)


# ---------------------------------------------------------- extrapolation

def test_extrapolation_constant_and_linear():
    eps = [0.1, 0.05, 0.025]
    ex = epsilon_extrapolate([np.full(3, 2.0)] * 3, eps)
    assert np.allclose(ex.limit, 2.0) and ex.error_norm < 1e-14
    ex = epsilon_extrapolate([1 + 3 * e for e in eps], eps)
    assert float(ex.limit) == pytest.approx(1.0, abs=1e-14)


def test_extrapolation_analytic_resolvent():
    eps = 0.01 * 2.0 ** -np.arange(5)
    vals = [1 / (0.3 + 1j * e) for e in eps]
    ex = epsilon_extrapolate(vals, eps, order=3)
    assert abs(ex.limit - 10 / 3) <= 1e-6


def test_extrapolation_rejects_growing_differences():
    eps = [0.1, 0.05, 0.025, 0.0125]
    vals = [0.0, 1.0, 3.0, 8.0]
    with pytest.raises(NonCauchyLadder):
        epsilon_extrapolate(vals, eps)
    assert not epsilon_extrapolate(vals, eps, strict=False).cauchy


def test_extrapolation_argument_checks():
    with pytest.raises(ValueError):
        epsilon_extrapolate([1.0, 2.0], [0.1, 0.05])
    with pytest.raises(ValueError):
        epsilon_extrapolate([1.0, 2.0, 3.0], [0.1, 0.05, 0.025], order=3)
