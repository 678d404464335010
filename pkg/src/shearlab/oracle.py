"""Independent reference: per-mode time stepping and direct elliptic solves."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import eig, lu_factor, lu_solve, solve_banded
from scipy.interpolate import BarycentricInterpolator

from .flow import ShearFlow, VorticityMode
from .green import channel_kernel


class StepSizeError(ValueError):
    pass


class InstabilityError(RuntimeError):
    pass


def channel_nodes(n: int) -> np.ndarray:
    """n intervals on [0, 1]."""
    return np.linspace(0.0, 1.0, n + 1)


def chebyshev_nodes(n: int) -> np.ndarray:
    """Chebyshev-Lobatto points mapped to [0, 1], increasing."""
    return 0.5 * (1 - np.cos(np.pi * np.arange(n + 1) / n))


def chebyshev_diff(n: int) -> np.ndarray:
    """Differentiation matrix on chebyshev_nodes(n)."""
    x = np.cos(np.pi * np.arange(n + 1) / n)
    c = np.ones(n + 1)
    c[0] = c[-1] = 2
    c *= (-1) ** np.arange(n + 1)
    X = x[:, None] - x[None, :]
    D = np.outer(c, 1 / c) / (X + np.eye(n + 1))
    D -= np.diag(D.sum(axis=1))
    # x runs from 1 to -1; y = (1 - x)/2 reverses and rescales
    return -2.0 * D


class EllipticSolver:
    """Reusable solver for (d^2/dy^2 - k^2) psi = omega, psi(0) = psi(1) = 0."""

    def __init__(self, y: np.ndarray, k: float, method: str = "fd"):
        self.y, self.k, self.method = np.asarray(y, float), float(k), method
        n = self.y.size - 1
        if method == "fd":
            h = self.y[1] - self.y[0]
            if not np.allclose(np.diff(self.y), h, rtol=1e-10, atol=0):
                raise ValueError("finite differences need a uniform grid")
            self.h = h
            m = n - 1
            ab = np.zeros((3, m))
            ab[0, 1:] = 1 / h**2
            ab[1, :] = -2 / h**2 - k**2
            ab[2, :-1] = 1 / h**2
            self.ab = ab
        elif method == "chebyshev":
            D = chebyshev_diff(n)
            L = D @ D - k**2 * np.eye(n + 1)
            self.L = L
            self.lu = lu_factor(L[1:-1, 1:-1])
        else:
            raise ValueError(f"unknown elliptic method {method!r}")

    def __call__(self, omega: np.ndarray) -> np.ndarray:
        omega = np.asarray(omega)
        psi = np.zeros(omega.shape, dtype=np.result_type(omega, float))
        if self.method == "fd":
            psi[1:-1] = solve_banded((1, 1), self.ab, omega[1:-1], check_finite=False)
        else:
            psi[1:-1] = lu_solve(self.lu, omega[1:-1], check_finite=False)
        return psi

    def residual(self, psi: np.ndarray, omega: np.ndarray) -> float:
        if self.method == "fd":
            lap = (psi[:-2] - 2 * psi[1:-1] + psi[2:]) / self.h**2 - self.k**2 * psi[1:-1]
            r = lap - omega[1:-1]
        else:
            r = (self.L @ psi)[1:-1] - omega[1:-1]
        return float(np.linalg.norm(r) / max(np.linalg.norm(omega[1:-1]), 1e-300))


def elliptic_solve(omega: np.ndarray, k: float, y: np.ndarray | None = None, method: str = "fd") -> np.ndarray:
    omega = np.asarray(omega)
    if y is None:
        y = channel_nodes(omega.size - 1) if method == "fd" else chebyshev_nodes(omega.size - 1)
    return EllipticSolver(y, k, method)(omega)


@dataclass(frozen=True, eq=False)
class EvolutionState:
    t: float
    y: np.ndarray
    omega: np.ndarray
    psi: np.ndarray


def max_stable_dt(flow: ShearFlow, k: int) -> float:
    return 0.1 / (abs(k) * float(np.max(np.abs(flow.b_of(np.linspace(0, 1, 2001))))))


def evolve_vorticity(initial: VorticityMode, flow: ShearFlow, k: int, t_end: float,
                     dt: float | None = None, samples: Sequence[float] | None = None,
                     n: int = 800, method: str = "fd", growth_cap: float = 10.0) -> list[EvolutionState]:
    """RK4 for d_t omega = -ik b omega + ik b'' psi with psi refreshed at every stage."""
    guard = max_stable_dt(flow, k)
    if dt is None:
        dt = 0.5 * guard
    if dt > guard * (1 + 1e-12):
        raise StepSizeError(f"dt={dt:.3g} exceeds guard {guard:.3g}")
    y = channel_nodes(n) if method == "fd" else chebyshev_nodes(n)
    solver = EllipticSolver(y, k, method)
    b, d2b = flow.b_of(y), flow.d2b_of(y)
    a1, a2 = -1j * k * b, 1j * k * d2b
    has_shear = np.any(d2b != 0)

    def rhs(om):
        out = a1 * om
        if has_shear:
            out = out + a2 * solver(om)
        return out

    samples = sorted(set([0.0, float(t_end)] if samples is None else [float(s) for s in samples]))
    if samples[-1] > t_end + 1e-12:
        raise ValueError("sample times beyond t_end")
    om = np.asarray(initial(y), complex)
    n0 = np.linalg.norm(om)
    states, t, si = [], 0.0, 0
    while si < len(samples):
        target = samples[si]
        while t < target - 1e-12:
            nsteps = int(np.ceil((target - t) / dt - 1e-9))
            h = (target - t) / nsteps
            for _ in range(nsteps):
                k1 = rhs(om)
                k2 = rhs(om + 0.5 * h * k1)
                k3 = rhs(om + 0.5 * h * k2)
                k4 = rhs(om + h * k3)
                om = om + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
            t = target
            if n0 > 0 and np.linalg.norm(om) > growth_cap * n0:
                raise InstabilityError(f"vorticity norm grew beyond {growth_cap}x at t={t:.3g}")
        states.append(EvolutionState(t, y, om.copy(), solver(om)))
        si += 1
    return states


def couette_reference(initial: VorticityMode, flow: ShearFlow, k: int, t: float, n: int = 800,
                      method: str = "fd") -> EvolutionState:
    if not flow.is_couette:
        raise ValueError("couette_reference requires the Couette flow")
    y = channel_nodes(n) if method == "fd" else chebyshev_nodes(n)
    om = np.exp(-1j * k * y * t) * initial(y)
    return EvolutionState(float(t), y, om, elliptic_solve(om, k, y, method))


def green_quadrature(omega_fn, k: float, y: np.ndarray, nz: int = 4000) -> np.ndarray:
    """psi(y) = -int_0^1 G_k(y, z) omega(z) dz by the trapezoid rule."""
    z = np.linspace(0, 1, nz + 1)
    G = channel_kernel(k, np.asarray(y)[:, None], z[None, :])
    return -np.trapezoid(G * omega_fn(z)[None, :], z, axis=1)


def resample(state: EvolutionState, y: np.ndarray, method: str = "fd") -> np.ndarray:
    """psi of a state on other nodes (barycentric for Chebyshev, linear for FD)."""
    if method == "chebyshev":
        return BarycentricInterpolator(state.y, state.psi)(y)
    return np.interp(y, state.y, state.psi.real) + 1j * np.interp(y, state.y, state.psi.imag)


# ------------------------------------------------------------ eigen scan

@dataclass(frozen=True, eq=False)
class SpectrumReport:
    k: int
    sizes: tuple[int, ...]
    eigenvalues: list[np.ndarray]
    candidates: list[np.ndarray]
    unstable: list[np.ndarray]
    flagged: np.ndarray

    @property
    def has_flags(self) -> bool:
        return self.flagged.size > 0


def _discrete_lk(flow: ShearFlow, k: int, n: int):
    y = channel_nodes(n)
    h = 1.0 / n
    yi = y[1:-1]
    G = channel_kernel(k, yi[:, None], yi[None, :])
    L = np.diag(flow.b_of(yi)) + flow.d2b_of(yi)[:, None] * G * h
    return yi, L


def embedded_eigenvalue_scan(flow: ShearFlow, k: int, sizes: Sequence[int] = (200, 400),
                             imag_tol: float = 1e-6, smooth_tol: float = 0.2,
                             match_tol: float = 1e-3) -> SpectrumReport:
    """Eigenvalues of b g + b'' int G g on two grids.

    A candidate is an eigenvalue in [b(0), b(1)] with |imag| <= imag_tol
    whose eigenvector is smooth (it is not one of the continuous-spectrum
    delta-like modes).  Candidates and unstable eigenvalues are flagged only
    when they persist on the finer grid.
    """
    b0, b1 = float(flow.b_of(0.0)), float(flow.b_of(1.0))
    eigs, cands, unst = [], [], []
    for n in sizes:
        yi, L = _discrete_lk(flow, k, n)
        lam, vec = eig(L)
        eigs.append(lam)
        if flow.is_couette:
            cands.append(np.array([], complex))
            unst.append(np.array([], complex))
            continue
        h = 1.0 / n
        dv = np.diff(vec, axis=0)
        rough = np.linalg.norm(dv, axis=0) / np.maximum(np.linalg.norm(vec, axis=0), 1e-300)
        smooth = rough < smooth_tol * np.sqrt(h) * 10
        inband = (lam.real >= b0) & (lam.real <= b1) & (np.abs(lam.imag) <= imag_tol)
        cands.append(lam[inband & smooth])
        unst.append(lam[lam.imag * k > max(imag_tol, 1e-8)])
    flagged = []
    if len(sizes) >= 2:
        for pool in (cands, unst):
            for lam in pool[-1]:
                if pool[-2].size and np.min(np.abs(pool[-2] - lam)) < match_tol:
                    flagged.append(lam)
    return SpectrumReport(int(k), tuple(int(s) for s in sizes), eigs, cands, unst, np.array(flagged, complex))
