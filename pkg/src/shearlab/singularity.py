"""Leading logarithmic singularities of the spectral density.

With the Green's function normalised so that (k^2 - d^2) G = delta, the
kink of G on the diagonal is -|y - z|/2, and the leading terms are

    d_v Theta  ~  A(v, w) log(v + i iota eps),
        A = (B'/B) Theta - f0/B^2                     (moving singularity)
    d_w Theta  ~  D^j(v, w) log(b(j) - w + i iota eps),
        D^j = -Phi^j [f0(b(j)) - b''(j) Theta(b(j) - w, w)] / b'(j)^2

where Phi^j solves the boundary-response equation with the same iota.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .density import BoundaryResponse, SpectralDensityField
from .flow import CutoffSet, ShearFlow, VorticityMode


class IllConditionedFit(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LogFit:
    c1: complex
    c0: complex
    c2: complex
    residual: float
    stderr: float
    n: int

    @property
    def interval(self) -> tuple[complex, float]:
        return self.c1, 1.96 * self.stderr


@dataclass(frozen=True, eq=False)
class SingularityCoefficients:
    w: np.ndarray
    A: np.ndarray                 # A(0, w_j)
    D0: np.ndarray | None
    D1: np.ndarray | None
    fitted_A: np.ndarray
    fitted_A_ci: np.ndarray
    fitted_D0: np.ndarray | None = None


def analytic_log_coefficient_v(field: SpectralDensityField, vorticity: VorticityMode,
                               flow: ShearFlow) -> np.ndarray:
    """A(v, w) on the stored grid: rows are u_i = v + w, columns w_j."""
    y = field.grid.y
    _, db, d2b = flow.evaluate(y)
    f0 = vorticity(y)
    return (d2b / db**2)[:, None] * field.theta - (f0 / db**2)[:, None]


def analytic_log_coefficient_at_pole(field: SpectralDensityField, vorticity: VorticityMode,
                                     flow: ShearFlow, columns: np.ndarray | None = None) -> np.ndarray:
    """A(0, w_j): the coefficient evaluated at the singular point u = w_j."""
    cols = np.arange(field.grid.w.size) if columns is None else np.asarray(columns)
    A = analytic_log_coefficient_v(field, vorticity, flow)
    rows = field.row_index(field.grid.y0[cols])
    return A[rows, cols]


def analytic_boundary_coefficient_w(field: SpectralDensityField, phi: BoundaryResponse,
                                    vorticity: VorticityMode, flow: ShearFlow, side: int) -> np.ndarray:
    """D^side(v, w) in lab rows u_i for every column w_j."""
    if phi.side != side:
        raise ValueError("boundary response is for the other side")
    yj = float(side)
    g = field.grid
    if not (g.u[0] <= flow.b_of(yj) <= g.u[-1]):
        raise ValueError("boundary point outside the interpolation range")
    _, dbj, d2bj = flow.evaluate(np.array(yj))
    theta_bd = field.at_u(flow.b_of(yj))          # Theta(b(j) - w_j, w_j), one per column
    f0j = vorticity(np.array(yj))
    coef = -(f0j - d2bj * theta_bd) / dbj**2
    return phi.phi * coef[None, :]


# ------------------------------------------------------------------- fits

def fit_log_coefficient(v: np.ndarray, samples: np.ndarray, epsilon: float, iota: int = 1,
                        window: tuple[float, float] = (2.0, 10.0), min_nodes: int = 12,
                        cond_cap: float = 1e8) -> LogFit:
    """Least squares of samples ~ c1 log(v + i iota eps) + c0 + c2 v on the window."""
    v = np.asarray(v, float)
    s = np.asarray(samples)
    av = np.abs(v)
    sel = (av >= window[0] * epsilon - 1e-14) & (av <= window[1] * epsilon + 1e-14)
    n = int(sel.sum())
    if n < min_nodes:
        raise IllConditionedFit(f"fit window holds {n} < {min_nodes} nodes")
    vv = v[sel]
    X = np.column_stack([np.log(vv + 1j * iota * epsilon), np.ones_like(vv), vv])
    cond = np.linalg.cond(X)
    if not np.isfinite(cond) or cond > cond_cap:
        raise IllConditionedFit(f"design condition number {cond:.3g} exceeds {cond_cap:.3g}")
    coef, *_ = np.linalg.lstsq(X, s[sel], rcond=None)
    r = s[sel] - X @ coef
    dof = max(n - 3, 1)
    sigma2 = float(np.sum(np.abs(r) ** 2) / dof)
    cov = sigma2 * np.linalg.inv(X.conj().T @ X)
    return LogFit(complex(coef[0]), complex(coef[1]), complex(coef[2]),
                  float(np.linalg.norm(r) / max(np.linalg.norm(s[sel]), 1e-300)),
                  float(np.sqrt(abs(cov[0, 0]))), n)


def dv_theta(field: SpectralDensityField, flow: ShearFlow, j: int) -> tuple[np.ndarray, np.ndarray]:
    """(v, d_v Theta(v, w_j)) from centered differences along the stored rows."""
    g = field.grid
    col = field.theta[:, j]
    dy = np.gradient(col, g.y, edge_order=2)
    return g.u - g.w[j], dy / flow.db_of(g.y)


def fit_column_A(field: SpectralDensityField, flow: ShearFlow, j: int,
                 window: tuple[float, float] = (2.0, 10.0)) -> LogFit:
    v, d = dv_theta(field, flow, j)
    return fit_log_coefficient(v, d, field.epsilon, field.iota, window)


def dw_theta_at_v(fields_w: SpectralDensityField, v: float) -> tuple[np.ndarray, np.ndarray]:
    """(w_j, d_w Theta(v, w_j)) along columns at fixed v, by cubic interpolation in u."""
    g = fields_w.grid
    theta = np.array([fields_w.shifted(np.array([v]), j)[0] for j in range(g.w.size)])
    return g.w, np.gradient(theta, g.w, edge_order=2)


def fit_boundary_D(field: SpectralDensityField, flow: ShearFlow, side: int, y_row: float,
                   window: tuple[float, float] = (2.0, 10.0)) -> LogFit:
    """Fit the log(b(j) - w + i iota eps) coefficient of d_w psi at fixed u = b(y_row).

    At fixed v, d_w Theta = d_w psi + d_u psi; the second term only
    carries the moving singularity at w = u, which is far from w = b(j).
    """
    g = field.grid
    i = field.row_index(y_row)[0]
    row = field.theta[i]
    dw = np.gradient(row, g.w, edge_order=2)
    du = np.gradient(field.theta, g.u, axis=0, edge_order=2)[i]
    dth = dw + du
    x = flow.b_of(float(side)) - g.w
    # log(x + i iota eps) with x = b(j) - w, expressed through the v-style fitter
    return fit_log_coefficient(x, dth, field.epsilon, field.iota, window)


# ---------------------------------------------------------------- reports

@dataclass(frozen=True, eq=False)
class VanishingReport:
    D0_max: tuple[float, float]
    D0_ratio: float
    beta1: tuple[float, float] | None
    beta1_ratio: float | None


def max_boundary_coefficient(field: SpectralDensityField, phi: BoundaryResponse,
                             vorticity: VorticityMode, flow: ShearFlow, side: int = 0,
                             channel_only: bool = True) -> float:
    D = analytic_boundary_coefficient_w(field, phi, vorticity, flow, side)
    if channel_only:
        rows = (field.grid.y >= 0) & (field.grid.y <= 1)
        D = D[rows]
    return float(np.max(np.abs(D)))


def vanishing_report(d0_with: float, d0_without: float, beta_with: float | None = None,
                     beta_without: float | None = None) -> VanishingReport:
    """Ratios (nonvanishing / vanishing) of max|D0| and of fitted |beta_1|."""
    ratio = d0_with / d0_without if d0_without > 0 else np.inf
    if d0_with == d0_without:
        ratio = 1.0
    br = None
    if beta_with is not None and beta_without is not None:
        br = 1.0 if beta_with == beta_without else (beta_with / beta_without if beta_without > 0 else np.inf)
    return VanishingReport((d0_with, d0_without), float(ratio),
                           None if beta_with is None else (beta_with, beta_without), br)


def remainder_growth(fields: Sequence[SpectralDensityField], flow: ShearFlow, vorticity: VorticityMode,
                     j_of_field=None, y_range: tuple[float, float] | None = None
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Discrete W^{1,1} norms in v of d_v Theta and of d_v Theta - A log(v + i eps) across a ladder.

    ``j_of_field`` picks the column per field (default: the column closest to w = 0.5 (b(0)+b(1))).
    ``y_range`` restricts the rows, e.g. to keep the channel ends out of the norm.
    """
    raw, rem = [], []
    for f in fields:
        g = f.grid
        j = int(np.argmin(np.abs(g.w - 0.5 * (g.w[0] + g.w[-1])))) if j_of_field is None else j_of_field(f)
        v, d = dv_theta(f, flow, j)
        A = analytic_log_coefficient_v(f, vorticity, flow)[:, j]
        r = d - A * np.log(v + 1j * f.iota * f.epsilon)
        if y_range is not None:
            keep = (g.y >= y_range[0]) & (g.y <= y_range[1])
            v, d, r = v[keep], d[keep], r[keep]
        dvv = np.gradient(v)
        w11 = lambda q: float(np.sum(np.abs(q) * dvv) + np.sum(np.abs(np.gradient(q, v)) * dvv))
        raw.append(w11(d))
        rem.append(w11(r))
    return np.array(raw), np.array(rem)
