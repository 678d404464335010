"""Spectral density solves with limiting absorption.

The unknown psi^iota(y, y0) is stored in lab coordinates: rows are nodes y_i
of the rung grid inside supp Psi_k, columns are the spectral parameters
w_j = b(y0_j).  The shifted density Theta(v, w) = psi(b^{-1}(v + w), y0) is
available through interpolation on demand.

Because b'' is compactly supported, I + M differs from the identity only in
the columns where b'' != 0.  Each column solve therefore factorises the
principal block on that support (an exact Schur reduction) and recovers the
remaining entries by one matrix-vector product.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import lapack, solve_triangular, svdvals

from .flow import CutoffSet, ShearFlow, VorticityMode, inverse_b, uniform_grid
from .green import extended_kernel, sinh_ratio

DEFAULT_LADDER = (1e-1, 5e-2, 2.5e-2, 1.25e-2, 6.25e-3)


class ResolutionError(ValueError):
    """epsilon below the grid-resolution floor."""


class SolverError(RuntimeError):
    def __init__(self, msg: str, w: float, epsilon: float):
        super().__init__(f"{msg} (w={w:.6g}, epsilon={epsilon:.3g})")
        self.w, self.epsilon = w, epsilon


class NonCauchyLadder(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RungGrid:
    epsilon: float
    points_per_unit: int
    y: np.ndarray        # unknown nodes, Psi_k(y) > 0
    u: np.ndarray        # b(y)
    y0: np.ndarray       # column nodes
    w: np.ndarray        # b(y0)
    h: float
    dv: float            # max spacing of u

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.y.size, self.h)


@dataclass(frozen=True, eq=False)
class AbsorptionContext:
    k: int
    iota: int
    epsilon_ladder: tuple[float, ...]
    kappa: float
    rungs: tuple[RungGrid, ...]

    @property
    def v_grid(self) -> np.ndarray:
        return self.rungs[-1].u

    @property
    def w_grid(self) -> np.ndarray:
        return self.rungs[-1].w

    @property
    def weights(self) -> np.ndarray:
        return self.rungs[-1].weights

    def with_iota(self, iota: int) -> "AbsorptionContext":
        return AbsorptionContext(self.k, _sign(iota), self.epsilon_ladder, self.kappa, self.rungs)


def _sign(iota) -> int:
    if iota in (1, "+", "plus"):
        return 1
    if iota in (-1, "-", "minus"):
        return -1
    raise ValueError(f"iota must be +1 or -1, got {iota!r}")


def _rung_grid(epsilon: float, m: int, flow: ShearFlow, cutoffs: CutoffSet,
               w_range: tuple[float, float], column_stride: int, kappa: float) -> RungGrid:
    yg = uniform_grid(m)
    lo, hi = cutoffs.psi_support
    y = yg[(yg > lo + 1e-12) & (yg < hi - 1e-12)]
    y = y[cutoffs.psi_k(y) > 0]
    u = flow.b_of(y)
    dv = float(np.max(np.diff(u)))
    if epsilon < kappa * dv * (1 - 1e-12):
        raise ResolutionError(f"epsilon={epsilon:.3g} < kappa*dv={kappa * dv:.3g}; refine the grid")
    y0_lo, y0_hi = inverse_b(flow, np.array(w_range))
    sel = (yg >= y0_lo - 1e-12) & (yg <= y0_hi + 1e-12)
    y0 = yg[sel][::column_stride]
    return RungGrid(epsilon, m, y, u, y0, flow.b_of(y0), 1.0 / m, dv)


def build_context(k: int, flow: ShearFlow, cutoffs: CutoffSet, iota: int = 1,
                  ladder: Sequence[float] = DEFAULT_LADDER, base_points: int | None = None,
                  kappa: float = 3.0, w_range: str | tuple[float, float] = "channel",
                  column_stride: int = 1) -> AbsorptionContext:
    """Ladder of (epsilon, grid) rungs; the grid doubles whenever epsilon halves.

    ``w_range`` is "channel" for [b(0), b(1)], "extended" for
    [b(0) - 0.3, b(1) + 0.3], or an explicit (w_lo, w_hi) pair.
    """
    eps = tuple(float(e) for e in ladder)
    if len(eps) < 1 or any(e2 >= e1 for e1, e2 in zip(eps, eps[1:])):
        raise ValueError("epsilon ladder must be strictly decreasing")
    if kappa < 3:
        raise ValueError("kappa must be >= 3")
    b0, b1 = float(flow.b_of(0.0)), float(flow.b_of(1.0))
    if w_range == "channel":
        wr = (b0, b1)
    elif w_range == "extended":
        wr = (b0 - 0.3, b1 + 0.3)
    else:
        wr = tuple(float(x) for x in w_range)
    if base_points is None:
        # smallest coarse grid meeting eps >= kappa*dv on the first rung
        dbmax = float(np.max(flow.db_of(np.linspace(-0.2, 1.2, 4001))))
        base_points = max(int(np.ceil(kappa * dbmax / eps[0])), 8)
    rungs = []
    for e in eps:
        m = int(round(base_points * eps[0] / e))
        rungs.append(_rung_grid(e, m, flow, cutoffs, wr, column_stride, kappa))
    return AbsorptionContext(int(k), _sign(iota), eps, float(kappa), tuple(rungs))


# ---------------------------------------------------------------- assembly

def _check_resolution(epsilon: float, grid: RungGrid, kappa: float = 3.0) -> None:
    if epsilon < kappa * grid.dv * (1 - 1e-12):
        raise ResolutionError(f"epsilon={epsilon:.3g} below kappa*dv={kappa * grid.dv:.3g}")


def _pole(values: np.ndarray, w, epsilon: float, iota: int) -> np.ndarray:
    return 1.0 / (values - w + 1j * iota * epsilon)


def assemble_operator(k: int, epsilon: float, iota: int, w: float, grid: RungGrid,
                      flow: ShearFlow, cutoffs: CutoffSet, kappa: float = 3.0) -> np.ndarray:
    """Nystrom matrix of T_{k,eps} for one column w, on the unknown nodes."""
    _check_resolution(epsilon, grid, kappa)
    kern = extended_kernel(k, grid.y[:, None], grid.y[None, :], cutoffs)
    d = flow.d2b_of(grid.y) * grid.h * _pole(grid.u, w, epsilon, _sign(iota))
    return kern * d[None, :]


def _rhs_nodes(grid: RungGrid, vorticity: VorticityMode):
    yg = uniform_grid(grid.points_per_unit)
    yg = yg[(yg >= -2.0) & (yg <= 2.0)]
    om = vorticity(yg)
    nz = np.abs(om) > 0
    return yg[nz], om[nz]


def assemble_rhs(k: int, epsilon: float, iota: int, w, grid: RungGrid, vorticity: VorticityMode,
                 flow: ShearFlow, cutoffs: CutoffSet, kappa: float = 3.0) -> np.ndarray:
    """Trapezoid quadrature of int G(y,z) omega0(z) / (b(z) - w + i iota eps) dz.

    ``w`` may be a scalar or an array of columns.
    """
    _check_resolution(epsilon, grid, kappa)
    z, om = _rhs_nodes(grid, vorticity)
    w_arr = np.atleast_1d(np.asarray(w, float))
    if z.size == 0:
        out = np.zeros((grid.y.size, w_arr.size), complex)
    else:
        kern = extended_kernel(k, grid.y[:, None], z[None, :], cutoffs)
        poles = _pole(flow.b_of(z)[:, None], w_arr[None, :], epsilon, _sign(iota))
        out = kern @ ((om * grid.h)[:, None] * poles)
    return out[:, 0] if np.ndim(w) == 0 else out


def boundary_forcing(k: int, grid: RungGrid, cutoffs: CutoffSet, side: int) -> np.ndarray:
    arg = 1.0 - grid.y if side == 0 else grid.y
    return cutoffs.psi_k(grid.y) * sinh_ratio(k, arg)


# ------------------------------------------------------------------ solves

@dataclass(frozen=True, eq=False)
class SpectralDensityField:
    k: int
    iota: int
    epsilon: float
    grid: RungGrid
    theta: np.ndarray               # psi^iota(y_i, y0_j)
    residual: np.ndarray            # per column relative residual
    rcond: np.ndarray               # per column reciprocal condition estimate
    context: AbsorptionContext | None = field(default=None, repr=False)

    @property
    def solve_diagnostics(self) -> dict:
        return {"residual": self.residual, "rcond": self.rcond}

    def row_index(self, y) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, float))
        idx = np.rint((y - self.grid.y[0]) * self.grid.points_per_unit).astype(int)
        if np.any(idx < 0) or np.any(idx >= self.grid.y.size) or \
                np.any(np.abs(self.grid.y[idx] - y) > 1e-9):
            raise ValueError("requested y is not a node of this rung")
        return idx

    def spline(self, j: int) -> CubicSpline:
        return CubicSpline(self.grid.u, self.theta[:, j])

    def at_u(self, u) -> np.ndarray:
        """psi(b^{-1}(u), y0_j) for all columns j, by cubic interpolation along u."""
        u = np.asarray(u, float)
        if np.any(u < self.grid.u[0] - 1e-12) or np.any(u > self.grid.u[-1] + 1e-12):
            raise ValueError("interpolation point outside the solve grid")
        return CubicSpline(self.grid.u, self.theta, axis=0)(u)

    def shifted(self, v, j: int) -> np.ndarray:
        """Theta(v, w_j) = psi(b^{-1}(v + w_j), y0_j); zero outside the support."""
        u = np.asarray(v, float) + self.grid.w[j]
        out = np.zeros(u.shape, complex)
        inside = (u >= self.grid.u[0]) & (u <= self.grid.u[-1])
        out[inside] = self.spline(j)(u[inside])
        return out


@dataclass(frozen=True, eq=False)
class BoundaryResponse:
    side: int
    epsilon: float
    iota: int
    grid: RungGrid
    phi: np.ndarray                 # Phi^side(y_i, w_j)
    residual: np.ndarray

    @property
    def phi0(self) -> np.ndarray | None:
        return self.phi if self.side == 0 else None

    @property
    def phi1(self) -> np.ndarray | None:
        return self.phi if self.side == 1 else None


def _factor(a: np.ndarray):
    lu, piv, info = lapack.zgetrf(a)
    if info != 0:
        return None, None, 0.0
    anorm = np.abs(a).sum(axis=0).max()
    rcond, _ = lapack.zgecon(lu, anorm, norm="1")
    return lu, piv, float(rcond)


def _solve_columns(k: int, epsilon: float, iota: int, grid: RungGrid, flow: ShearFlow,
                   cutoffs: CutoffSet, rhs_list: list[np.ndarray], columns: np.ndarray,
                   threads: int = 1):
    """Solve (I + M_j) x = r_j for each column j and each right-hand side family."""
    n = grid.y.size
    d2 = flow.d2b_of(grid.y)
    S = np.nonzero(d2 != 0)[0]
    outs = [np.array(r, dtype=complex, copy=True) for r in rhs_list]
    res = np.zeros((len(rhs_list), columns.size))
    rc = np.ones(columns.size)
    if S.size == 0:
        return outs, res, rc
    kern_US = extended_kernel(k, grid.y[:, None], grid.y[S][None, :], cutoffs)
    kern_SS = kern_US[S]
    dS_all = (d2[S] * grid.h)[:, None] * _pole(grid.u[S][:, None], grid.w[columns][None, :],
                                                epsilon, iota)

    def work(js: np.ndarray):
        for jj in js:
            d = dS_all[:, jj]
            red = kern_SS * d[None, :]
            red[np.diag_indices_from(red)] += 1.0
            lu, piv, rcond = _factor(red)
            if lu is None or rcond < 1e-13:
                raise SolverError("near-singular system", float(grid.w[columns[jj]]), epsilon)
            rc[jj] = rcond
            for q, r in enumerate(rhs_list):
                b = r[:, jj]
                x = b.copy()
                for _ in range(2):  # solve plus one refinement step
                    resid = b - (x + kern_US @ (d * x[S]))
                    xs, _ = lapack.zgetrs(lu, piv, resid[S])
                    x = x + resid - kern_US @ (d * xs)
                resid = b - (x + kern_US @ (d * x[S]))
                nb = np.linalg.norm(b)
                res[q, jj] = np.linalg.norm(resid) / nb if nb > 0 else np.linalg.norm(resid)
                outs[q][:, jj] = x

    chunks = np.array_split(np.arange(columns.size), max(1, threads))
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            list(ex.map(work, chunks))
    else:
        work(chunks[0])
    return outs, res, rc


def solve_rung(context: AbsorptionContext, rung: int, vorticity: VorticityMode | None,
               flow: ShearFlow, cutoffs: CutoffSet, sides: Sequence[int] = (),
               threads: int = 1) -> tuple[SpectralDensityField | None, list[BoundaryResponse]]:
    """Density and boundary responses for one rung, sharing the factorisations."""
    g = context.rungs[rung]
    k, iota, eps = context.k, context.iota, g.epsilon
    cols = np.arange(g.w.size)
    rhs = []
    if vorticity is not None:
        rhs.append(assemble_rhs(k, eps, iota, g.w, g, vorticity, flow, cutoffs, context.kappa))
    for s in sides:
        rhs.append(np.repeat(boundary_forcing(k, g, cutoffs, s)[:, None], g.w.size, axis=1).astype(complex))
    outs, res, rc = _solve_columns(k, eps, iota, g, flow, cutoffs, rhs, cols, threads)
    field_ = None
    q = 0
    if vorticity is not None:
        field_ = SpectralDensityField(k, iota, eps, g, outs[0], res[0], rc, context)
        q = 1
    resp = [BoundaryResponse(s, eps, iota, g, outs[q + i], res[q + i]) for i, s in enumerate(sides)]
    return field_, resp


def solve_density(context: AbsorptionContext, vorticity: VorticityMode, flow: ShearFlow,
                  cutoffs: CutoffSet, rungs: Sequence[int] | None = None,
                  threads: int = 1) -> list[SpectralDensityField]:
    idx = range(len(context.rungs)) if rungs is None else rungs
    return [solve_rung(context, r, vorticity, flow, cutoffs, (), threads)[0] for r in idx]


def solve_boundary_response(context: AbsorptionContext, flow: ShearFlow, cutoffs: CutoffSet,
                            side: int, rung: int = -1, threads: int = 1) -> BoundaryResponse:
    if side not in (0, 1):
        raise ValueError("side must be 0 or 1")
    r = rung % len(context.rungs)
    return solve_rung(context, r, None, flow, cutoffs, (side,), threads)[1][0]


# -------------------------------------------------------------- diagnostics

def h1k_gram(k: int, grid: RungGrid, flow: ShearFlow) -> np.ndarray:
    """Gram matrix of <f,g> = k^2 <f,g> + <f', g'> in v, on the unknown nodes."""
    n = grid.y.size
    db = flow.db_of(grid.y)
    W = grid.h * db
    D = np.zeros((n, n))
    i = np.arange(1, n - 1)
    D[i, i + 1] = 1.0 / (2 * grid.h)
    D[i, i - 1] = -1.0 / (2 * grid.h)
    D[0, :2] = [-1.0 / grid.h, 1.0 / grid.h]
    D[-1, -2:] = [-1.0 / grid.h, 1.0 / grid.h]
    Dv = D / db[:, None]
    return k**2 * np.diag(W) + Dv.T @ (W[:, None] * Dv)


def lap_sigma_min(k: int, epsilon: float, w, grid: RungGrid, flow: ShearFlow,
                  cutoffs: CutoffSet, iota: int = 1, kappa: float = 3.0) -> np.ndarray:
    """Smallest H^1_k singular value of I + M for each requested column w.

    With G = R^T R, the singular values of R (I + K D) R^{-1} are those of
    I + U D V^H with U = R K[:, S] and V^H = R^{-1}[S, :].  Both factors live
    in a fixed subspace of dimension <= 2|S|, so only a small SVD is needed
    per column; every other singular value equals one.
    """
    _check_resolution(epsilon, grid, kappa)
    G = h1k_gram(k, grid, flow)
    R = np.linalg.cholesky(G).T          # G = R^T R
    n = grid.y.size
    Rinv = solve_triangular(R, np.eye(n))
    w_arr = np.atleast_1d(np.asarray(w, float))
    d2 = flow.d2b_of(grid.y)
    S = np.nonzero(d2 != 0)[0]
    if S.size == 0:
        out = np.ones(w_arr.size)
        return out if np.ndim(w) else out[0]
    U = R @ extended_kernel(k, grid.y[:, None], grid.y[S][None, :], cutoffs)
    Vh = Rinv[S, :]
    Q, _ = np.linalg.qr(np.hstack([U, Vh.conj().T]))
    QU, VQ = Q.conj().T @ U, Vh @ Q
    eye = np.eye(Q.shape[1])
    out = np.empty(w_arr.size)
    for j, wj in enumerate(w_arr):
        dS = d2[S] * grid.h * _pole(grid.u[S], wj, epsilon, _sign(iota))
        smin = svdvals(eye + (QU * dS[None, :]) @ VQ, check_finite=False).min()
        out[j] = min(smin, 1.0) if Q.shape[1] < n else smin
    return out if np.ndim(w) else out[0]


def _lap_sigma_min_dense(k, epsilon, w, grid, flow, cutoffs, iota=1, kappa=3.0) -> float:
    G = h1k_gram(k, grid, flow)
    R = np.linalg.cholesky(G).T
    Rinv = solve_triangular(R, np.eye(grid.y.size))
    A = assemble_operator(k, epsilon, iota, w, grid, flow, cutoffs, kappa)
    A[np.diag_indices(grid.y.size)] += 1.0
    return float(svdvals(R @ A @ Rinv, check_finite=False).min())


def operator_norm_h1k(k: int, epsilon: float, w: float, grid: RungGrid, flow: ShearFlow,
                      cutoffs: CutoffSet, iota: int = 1) -> float:
    G = h1k_gram(k, grid, flow)
    R = np.linalg.cholesky(G).T
    Rinv = solve_triangular(R, np.eye(grid.y.size))
    A = assemble_operator(k, epsilon, iota, w, grid, flow, cutoffs)
    return float(svdvals(R @ A @ Rinv, check_finite=False).max())


# ----------------------------------------------------------- extrapolation

@dataclass(frozen=True, eq=False)
class Extrapolation:
    limit: np.ndarray
    error: np.ndarray
    cauchy: bool
    differences: np.ndarray

    @property
    def error_norm(self) -> float:
        return float(np.linalg.norm(np.ravel(self.error)))


def _neville_at_zero(eps: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """Polynomial through (eps_i, vals_i) evaluated at 0 (Lagrange form)."""
    out = np.zeros(vals.shape[1:], dtype=vals.dtype)
    for i, ei in enumerate(eps):
        li = 1.0
        for j, ej in enumerate(eps):
            if j != i:
                li *= (0.0 - ej) / (ei - ej)
        out = out + li * vals[i]
    return out


def epsilon_extrapolate(fields: Sequence[np.ndarray], epsilons: Sequence[float], order: int = 2,
                        strict: bool = True) -> Extrapolation:
    """Polynomial extrapolation to epsilon = 0 through the last order+1 rungs.

    The error estimate is the difference between orders ``order`` and
    ``order - 1``.  A ladder whose successive differences grow is rejected
    (or flagged with ``strict=False``).
    """
    vals = np.asarray([np.asarray(f) for f in fields])
    eps = np.asarray(epsilons, float)
    if vals.shape[0] != eps.size or eps.size < 3:
        raise ValueError("need at least three rungs with matching epsilons")
    if order < 1 or order + 1 > eps.size:
        raise ValueError("order must satisfy 1 <= order <= len(ladder) - 1")
    diffs = np.array([np.linalg.norm(np.ravel(vals[i + 1] - vals[i])) for i in range(eps.size - 1)])
    scale = max(np.linalg.norm(np.ravel(vals[-1])), 1e-300)
    tail = diffs[-(order + 1):] if order + 1 <= diffs.size else diffs
    cauchy = bool(np.all(tail[1:] <= tail[:-1] * 1.05 + 1e-13 * scale))
    if not cauchy and strict:
        raise NonCauchyLadder(f"successive differences not decreasing: {diffs}")
    hi = _neville_at_zero(eps[-(order + 1):], vals[-(order + 1):])
    lo = _neville_at_zero(eps[-order:], vals[-order:]) if order >= 1 else vals[-1]
    return Extrapolation(hi, np.abs(hi - lo), cauchy, diffs)


# -------------------------------------------------------------- ladder run

@dataclass(frozen=True, eq=False)
class DensityLadder:
    """Density fields for both signs of iota on every rung."""
    k: int
    minus: list[SpectralDensityField]
    plus: list[SpectralDensityField]
    responses: dict = field(default_factory=dict)   # (iota, side, rung) -> BoundaryResponse

    @property
    def epsilons(self) -> list[float]:
        return [f.epsilon for f in self.minus]


def solve_ladder(context: AbsorptionContext, vorticity: VorticityMode, flow: ShearFlow,
                 cutoffs: CutoffSet, sides: Sequence[int] = (), threads: int = 1,
                 response_rungs: Sequence[int] = (-1,)) -> DensityLadder:
    minus, plus, responses = [], [], {}
    nr = len(context.rungs)
    want = {r % nr for r in response_rungs}
    for iota, store in ((-1, minus), (1, plus)):
        ctx = context.with_iota(iota)
        for r in range(nr):
            fld, resp = solve_rung(ctx, r, vorticity, flow, cutoffs, sides if r in want else (), threads)
            store.append(fld)
            for br in resp:
                responses[(iota, br.side, r)] = br
    return DensityLadder(context.k, minus, plus, responses)
