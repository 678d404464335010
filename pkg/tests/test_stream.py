import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from shearlab.density import build_context, solve_ladder
from shearlab.flow import VorticitySpec, build_cutoffs, build_flow, build_vorticity
from shearlab.oracle import green_quadrature
from shearlab.stream import (UnderResolvedError, check_resolution, demodulate_kernel_integral,
                             filon_trapezoid, log_growth_exponent, split_stream_regions,
                             stream_from_density, velocity_from_psi)

SHORT = (0.1, 0.05, 0.025)


@given(st.floats(-200, 200), st.floats(-3, 3), st.floats(-3, 3))
def test_filon_exact_for_linear(a, c0, c1):
    w = np.sort(np.r_[0.0, np.random.default_rng(0).uniform(0, 1, 30), 1.0])
    re = quad(lambda x: np.cos(a * x) * (c0 + c1 * x), 0, 1, limit=400)[0]
    im = quad(lambda x: -np.sin(a * x) * (c0 + c1 * x), 0, 1, limit=400)[0]
    got = filon_trapezoid(w, c0 + c1 * w, a)
    assert abs(got - (re + 1j * im)) < 1e-10


def test_resolution_guard():
    w = np.linspace(0, 1, 11)
    check_resolution(w, 1, 10.0)
    with pytest.raises(UnderResolvedError) as exc:
        check_resolution(w, 1, 100.0)
    assert exc.value.required_dw == pytest.approx(2 * np.pi / 100)


def _ladder(flow, spec, k=1):
    cut = build_cutoffs(k, 0.05, flow)
    vort = build_vorticity(spec, flow, k)
    ctx = build_context(k, flow, cut, ladder=SHORT)
    return solve_ladder(ctx, vort, flow, cut), vort, cut


def test_initial_stream_couette(couette):
    lad, vort, cut = _ladder(couette, VorticitySpec("bump", 0.5, 0.2))
    snap = stream_from_density(lad, [0.0], couette, cut)[0]
    ref = green_quadrature(vort, 1.0, snap.y, nz=8000)
    assert np.max(np.abs(snap.psi - ref)) <= 1e-3 * np.max(np.abs(ref))


def test_zero_vorticity_gives_zero_stream(perturbed):
    lad, _, cut = _ladder(perturbed, VorticitySpec("constant", amplitude=0.0))
    snaps = stream_from_density(lad, [0.0, 3.0], perturbed, cut)
    assert all(np.all(s.psi == 0) for s in snaps)


def test_region_parts_sum(perturbed):
    lad, _, cut = _ladder(perturbed, VorticitySpec("bump", 0.5, 0.2))
    snap = stream_from_density(lad, [2.0], perturbed, cut, split=True)[0]
    assert np.max(np.abs(sum(snap.parts) - snap.psi)) < 1e-13
    parts = split_stream_regions(lad, 2.0, perturbed, cut)
    assert len(parts) == 3
    with pytest.raises(ValueError):
        stream_from_density(lad, [2.0], perturbed, None, split=True)


def test_velocities_of_sine():
    y = np.linspace(0, 1, 2001)
    psi = np.sin(np.pi * y).astype(complex)
    vel = velocity_from_psi(y, psi, 2, 0.0)
    assert np.max(np.abs(vel.ux + np.pi * np.cos(np.pi * y))) < 1e-5
    assert np.allclose(vel.uy, 2j * psi)


def test_demodulated_simple_pole_is_constant():
    w = np.linspace(-1, 2, 60001)
    v = np.linspace(0.3, 0.7, 5)
    h = lambda x, ww: np.exp(-(ww - 0.5) ** 2)
    coefs = [demodulate_kernel_integral(h, 0, 1, t, 1e-4, v, w, iota=-1).coefficient[2] for t in (10, 40)]
    assert coefs[0] == pytest.approx(2j * np.pi, rel=1e-3)
    assert abs(coefs[1] - coefs[0]) < 0.01 * abs(coefs[0])


def test_demodulated_log_pole_grows_logarithmically():
    w = np.linspace(-1, 2, 60001)
    v = np.linspace(0.3, 0.7, 5)
    h = lambda x, ww: np.exp(-(ww - 0.5) ** 2)
    ts = np.array([10.0, 20.0, 40.0, 80.0])
    norms = [demodulate_kernel_integral(h, 1, 1, t, 1e-4, v, w, iota=-1).norm for t in ts]
    assert log_growth_exponent(ts, np.array(norms), 1) == pytest.approx(1.0, abs=0.15)


def test_demodulation_argument_checks():
    w = np.linspace(0, 1, 101)
    h = lambda x, ww: np.ones_like(x)
    with pytest.raises(ValueError):
        demodulate_kernel_integral(h, 4, 1, 1.0, 0.01, w, w)
    with pytest.raises(ValueError):
        demodulate_kernel_integral(h, 0, 1, 1.0, 0.01, w, w, pole="sideways")
