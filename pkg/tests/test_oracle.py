import numpy as np
import pytest

from shearlab.flow import VorticitySpec, build_flow, build_vorticity
from shearlab.oracle import (EllipticSolver, InstabilityError, StepSizeError, chebyshev_nodes,
                             couette_reference, elliptic_solve, embedded_eigenvalue_scan,
                             evolve_vorticity, green_quadrature, max_stable_dt, resample)

BUMP = VorticitySpec("bump", 0.5, 0.2)


def _manufactured_error(n, method, k=2.0):
    y = np.linspace(0, 1, n + 1) if method == "fd" else chebyshev_nodes(n)
    exact = np.sin(np.pi * y) * y
    # psi'' - k^2 psi = omega
    omega = (2 * np.pi * np.cos(np.pi * y) - np.pi**2 * y * np.sin(np.pi * y)) - k**2 * exact
    return np.max(np.abs(elliptic_solve(omega, k, y, method) - exact))


def test_fd_elliptic_second_order():
    e = [_manufactured_error(n, "fd") for n in (100, 200, 400)]
    assert np.log2(e[0] / e[1]) == pytest.approx(2, abs=0.1)
    assert np.log2(e[1] / e[2]) == pytest.approx(2, abs=0.1)


def test_chebyshev_elliptic_spectral():
    assert _manufactured_error(40, "chebyshev") < 1e-12


def test_elliptic_matches_green_quadrature(couette):
    vort = build_vorticity(BUMP, couette)
    y = np.linspace(0, 1, 801)
    psi = elliptic_solve(vort(y), 1.0, y)
    ref = green_quadrature(vort, 1.0, y[::40], nz=8000)
    assert np.max(np.abs(psi[::40] - ref)) < 1e-5 * np.max(np.abs(ref))


def test_solver_residual_and_method_check():
    y = np.linspace(0, 1, 101)
    s = EllipticSolver(y, 1.0)
    om = np.sin(3 * y)
    assert s.residual(s(om), om) < 1e-12
    with pytest.raises(ValueError):
        EllipticSolver(y, 1.0, method="spooky")
    with pytest.raises(ValueError):
        EllipticSolver(y**2, 1.0, method="fd")


def test_couette_transport_exact(couette):
    vort = build_vorticity(BUMP, couette)
    st = evolve_vorticity(vort, couette, 1, 10.0, n=400)
    ref = couette_reference(vort, couette, 1, 10.0, n=400)
    assert np.max(np.abs(st[-1].omega - ref.omega)) < 1e-6
    with pytest.raises(ValueError):
        couette_reference(vort, build_flow("perturbed_couette", a=0.05), 1, 1.0)


def test_rk4_fourth_order(couette):
    vort = build_vorticity(BUMP, couette)
    guard = max_stable_dt(couette, 1)
    ref = couette_reference(vort, couette, 1, 10.0, n=200).omega
    errs = [np.max(np.abs(evolve_vorticity(vort, couette, 1, 10.0, dt=dt, n=200)[-1].omega - ref))
            for dt in (guard, guard / 2)]
    assert errs[0] / errs[1] == pytest.approx(16, abs=3)


def test_step_guard(couette):
    vort = build_vorticity(BUMP, couette)
    with pytest.raises(StepSizeError):
        evolve_vorticity(vort, couette, 1, 1.0, dt=1.01 * max_stable_dt(couette, 1))
    assert max_stable_dt(couette, -2) == max_stable_dt(couette, 2)


def test_zero_initial_data(perturbed):
    zero = build_vorticity(VorticitySpec("constant", amplitude=0.0), perturbed)
    st = evolve_vorticity(zero, perturbed, 1, 5.0, n=200)
    assert all(np.all(s.omega == 0) and np.all(s.psi == 0) for s in st)


def test_sample_times(perturbed):
    vort = build_vorticity(BUMP, perturbed)
    st = evolve_vorticity(vort, perturbed, 1, 3.0, samples=[0, 1.5, 3], n=200)
    assert [s.t for s in st] == [0.0, 1.5, 3.0]
    with pytest.raises(ValueError):
        evolve_vorticity(vort, perturbed, 1, 3.0, samples=[4.0], n=200)


def test_perturbed_vorticity_norm_bounded(perturbed):
    vort = build_vorticity(BUMP, perturbed)
    st = evolve_vorticity(vort, perturbed, 1, 50.0, samples=np.linspace(0, 50, 11), n=400)
    n0 = np.linalg.norm(st[0].omega)
    ratios = [np.linalg.norm(s.omega) / n0 for s in st]
    assert 0.5 <= min(ratios) and max(ratios) <= 2.0


def test_conjugate_mode(perturbed):
    vort = build_vorticity(BUMP, perturbed)
    p = evolve_vorticity(vort, perturbed, 1, 4.0, n=200)[-1]
    m = evolve_vorticity(vort, perturbed, -1, 4.0, n=200)[-1]
    assert np.max(np.abs(m.psi - p.psi.conj())) < 1e-12


def test_resample_linear_and_barycentric(couette):
    vort = build_vorticity(BUMP, couette)
    y = np.linspace(0, 1, 33)
    fd = couette_reference(vort, couette, 1, 2.0, n=800)
    ch = couette_reference(vort, couette, 1, 2.0, n=120, method="chebyshev")
    assert np.max(np.abs(resample(fd, y) - resample(ch, y, "chebyshev"))) < 1e-5


def test_spectrum_scan(couette, perturbed):
    assert not embedded_eigenvalue_scan(couette, 1).has_flags
    assert not embedded_eigenvalue_scan(perturbed, 1).has_flags
    infl = build_flow("inflected_couette", a=0.05)
    rep = embedded_eigenvalue_scan(infl, 1)
    assert rep.has_flags
    assert np.any(np.abs(rep.flagged.imag) > 0.05)


def test_unstable_flow_trips_growth_guard():
    infl = build_flow("inflected_couette", a=0.05)
    vort = build_vorticity(BUMP, infl)
    with pytest.raises(InstabilityError):
        evolve_vorticity(vort, infl, 1, 150.0, n=200)
