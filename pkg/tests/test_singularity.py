import numpy as np
import pytest

from shearlab.density import boundary_forcing, build_context, solve_ladder, solve_rung
from shearlab.flow import VorticitySpec, build_cutoffs, build_vorticity
from shearlab.singularity import (IllConditionedFit, analytic_boundary_coefficient_w,
                                  analytic_log_coefficient_at_pole, analytic_log_coefficient_v,
                                  fit_column_A, fit_log_coefficient, max_boundary_coefficient,
                                  remainder_growth, vanishing_report)

SHORT = (0.1, 0.05, 0.025)


def test_synthetic_log_recovery():
    eps = 1e-3
    v = np.linspace(-0.02, 0.02, 4001)
    s = (2 + 1j) * np.log(v + 1j * eps) + 0.3 - 0.7 * v
    fit = fit_log_coefficient(v, s, eps)
    assert abs(fit.c1 - (2 + 1j)) < 1e-10
    c, half = fit.interval
    assert half < 1e-8


def test_null_case_has_no_log():
    eps = 1e-3
    v = np.linspace(-0.02, 0.02, 4001)
    fit = fit_log_coefficient(v, 1 + v**3, eps)
    assert abs(fit.c1) < 1e-6


def test_window_too_small_is_rejected():
    v = np.linspace(-1, 1, 21)
    with pytest.raises(IllConditionedFit):
        fit_log_coefficient(v, v, 1e-3)


def _couette_rung(couette, spec):
    cut = build_cutoffs(1, 0.05, couette)
    vort = build_vorticity(spec, couette, 1)
    ctx = build_context(1, couette, cut, ladder=(0.04, 0.02, 0.01))
    fld, (phi,) = solve_rung(ctx, 2, vort, couette, cut, sides=(0,))
    return fld, phi, vort, cut


def test_couette_moving_coefficient(couette):
    fld, _, vort, _ = _couette_rung(couette, VorticitySpec("constant"))
    A = analytic_log_coefficient_v(fld, vort, couette)
    assert np.allclose(A, -vort(fld.grid.y)[:, None])
    g = fld.grid
    cols = np.nonzero((g.y0 > 0.3) & (g.y0 < 0.7))[0][::10]
    Ap = analytic_log_coefficient_at_pole(fld, vort, couette, cols)
    assert np.allclose(Ap, -1.0)
    for j, a in zip(cols, Ap):
        assert abs(fit_column_A(fld, couette, int(j)).c1 - a) < 0.05


def test_couette_boundary_coefficient(couette):
    fld, phi, vort, cut = _couette_rung(couette, VorticitySpec("constant"))
    D = analytic_boundary_coefficient_w(fld, phi, vort, couette, 0)
    forcing = boundary_forcing(1, fld.grid, cut, 0)
    assert np.allclose(D, -forcing[:, None] * float(vort(np.array(0.0)).real))
    with pytest.raises(ValueError):
        analytic_boundary_coefficient_w(fld, phi, vort, couette, 1)


def test_boundary_coefficient_vanishes_with_vorticity(couette):
    fld, phi, vort, _ = _couette_rung(couette, VorticitySpec("constant", vanish=(2, 0)))
    assert max_boundary_coefficient(fld, phi, vort, couette) == 0.0


def test_vanishing_report_ratios():
    assert vanishing_report(0.3, 0.3).D0_ratio == 1.0
    rep = vanishing_report(1.0, 0.0, 2.0, 0.1)
    assert rep.D0_ratio == np.inf and rep.beta1_ratio == pytest.approx(20.0)
    assert vanishing_report(1.0, 0.5, 0.2, 0.2).beta1_ratio == 1.0


def test_remainder_bounded_while_raw_grows(perturbed):
    cut = build_cutoffs(1, 0.05, perturbed)
    vort = build_vorticity(VorticitySpec("gaussian", 0.5, 0.25), perturbed, 1)
    ctx = build_context(1, perturbed, cut, ladder=(0.1, 0.05, 0.025, 0.0125))
    lad = solve_ladder(ctx, vort, perturbed, cut)
    raw, rem = remainder_growth(lad.plus, perturbed, vort, y_range=(0.125, 0.875))
    # raw grows like log(1/eps) per halving; the remainder much more slowly
    assert np.all(np.diff(raw) > 1.0)
    assert rem[-1] - rem[0] < 0.5 * (raw[-1] - raw[0])
    full_raw, _ = remainder_growth(lad.plus, perturbed, vort)
    assert np.all(full_raw >= raw)
