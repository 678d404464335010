"""Norms, profile fits and decay exponents."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .flow import CutoffSet, ShearFlow


class RoughnessError(ValueError):
    """Derivative estimates are dominated by grid noise."""


class IllConditionedWindow(ValueError):
    pass


class AliasingError(ValueError):
    pass


# ------------------------------------------------------------------- norms

@dataclass(frozen=True)
class NormReport:
    n: int
    k: float
    value: float
    contributions: tuple[float, ...]


def _derivatives(h: np.ndarray, dx: float, n: int) -> list[np.ndarray]:
    out = [h]
    for _ in range(n):
        out.append(np.gradient(out[-1], dx, edge_order=2))
    return out


def weighted_norm(h: np.ndarray, n: int, k: float, grid: np.ndarray, rough_tol: float = 0.25) -> NormReport:
    """sum_a |k|^{n-a} ||d^a h||_{L2} with centered differences on a uniform grid."""
    h = np.asarray(h)
    x = np.asarray(grid, float)
    dx = float(x[1] - x[0])
    if not np.allclose(np.diff(x), dx, rtol=1e-8, atol=0):
        raise ValueError("weighted_norm needs a uniform grid")
    if h.size < 2 * n + 5:
        raise RoughnessError("grid too short for the requested derivative order")
    ders = _derivatives(h, dx, n)
    l2 = lambda f, d: float(np.sqrt(np.trapezoid(np.abs(f) ** 2, dx=d)))
    norms = [l2(d, dx) for d in ders]
    if n > 0 and norms[-1] > 0:
        coarse = _derivatives(h[::2], 2 * dx, n)[-1]
        nc = l2(coarse, 2 * dx)
        if abs(nc - norms[-1]) > rough_tol * max(norms[-1], nc):
            raise RoughnessError(f"order-{n} derivative not resolved (grid {norms[-1]:.3g} vs coarse {nc:.3g})")
    contrib = tuple(abs(k) ** (n - a) * norms[a] for a in range(n + 1))
    return NormReport(int(n), float(k), float(sum(contrib)), contrib)


def _spectrum(h: np.ndarray, dx: float, pad: int = 8) -> tuple[np.ndarray, np.ndarray]:
    N = h.size * pad
    H = np.fft.fft(h, n=N) * dx
    xi = 2 * np.pi * np.fft.fftfreq(N, d=dx)
    return xi, H


def sobolev_norm_spectral(h: np.ndarray, dx: float, r: float, pad: int = 8) -> float:
    xi, H = _spectrum(np.asarray(h), dx, pad)
    dxi = 2 * np.pi / (H.size * dx)
    return float(np.sqrt(np.sum((1 + xi**2) ** r * np.abs(H) ** 2) * dxi / (2 * np.pi)))


def interpolation_constant(h: np.ndarray, r: float, k: float, dx: float, pad: int = 8) -> float:
    """||h||_{H^r} / (|k|^{r-1} ||h||_{H^1_k}) with spectral norms."""
    xi, H = _spectrum(np.asarray(h), dx, pad)
    dxi = 2 * np.pi / (H.size * dx)
    l2 = np.sqrt(np.sum(np.abs(H) ** 2) * dxi / (2 * np.pi))
    d1 = np.sqrt(np.sum(xi**2 * np.abs(H) ** 2) * dxi / (2 * np.pi))
    hr = sobolev_norm_spectral(h, dx, r, pad)
    return float(hr / (abs(k) ** (r - 1) * (abs(k) * l2 + d1)))


# ----------------------------------------------------------------- decays

@dataclass(frozen=True)
class DecayFit:
    slope: float
    interval: tuple[float, float]
    intercept: float


def decay_exponent(t: Sequence[float], values: Sequence[float], min_points: int = 8,
                   min_decades: float = 1.0) -> DecayFit:
    t = np.asarray(t, float)
    v = np.asarray(values, float)
    if np.any(v <= 0) or np.any(t <= 0):
        raise ValueError("decay fits need positive times and values")
    if t.size < min_points:
        raise ValueError(f"need at least {min_points} points")
    if np.log10(t.max() / t.min()) < min_decades - 1e-9:
        raise ValueError("series must span at least one decade")
    res = stats.linregress(np.log(t), np.log(v))
    q = stats.t.ppf(0.975, t.size - 2) if t.size > 2 else np.inf
    return DecayFit(float(res.slope), (float(res.slope - q * res.stderr), float(res.slope + q * res.stderr)),
                    float(res.intercept))


# --------------------------------------------------------------- profiles

@dataclass(frozen=True, eq=False)
class WindowFit:
    t_mid: float
    times: np.ndarray
    y: np.ndarray
    coefficients: np.ndarray      # [y, parameter]
    residual: float               # relative, aggregated over y and time
    residual_abs: float           # RMS of the residual in stream units
    single_residual: float | None
    condition: np.ndarray


@dataclass(frozen=True, eq=False)
class ProfileDecomposition:
    k: int
    windows: list[WindowFit]
    kind: str = "interior"
    orders: int = 3
    log_growth: dict = field(default_factory=dict)

    def _col(self, i: int) -> list[np.ndarray]:
        return [w.coefficients[:, i] for w in self.windows]

    @property
    def alpha_in(self):
        return self._col(0)

    @property
    def beta_in(self):
        return self._col(1)

    @property
    def gamma_in(self):
        return self._col(2)

    # boundary expansion: columns are alpha_1..alpha_{N-2}, beta_1..beta_{N-2}
    @property
    def alpha1(self):
        return self._col(0)

    @property
    def alpha2(self):
        return self._col(1) if self.orders >= 2 else None

    @property
    def beta1(self):
        return self._col(self.orders)

    @property
    def beta2(self):
        return self._col(self.orders + 1) if self.orders >= 2 else None

    @property
    def residual_N(self) -> np.ndarray:
        return np.array([w.residual_abs for w in self.windows])

    @property
    def condition(self) -> np.ndarray:
        return np.array([np.nanmax(w.condition) if w.condition.size else np.nan for w in self.windows])


def _windows(times: np.ndarray, window: int | None, stride: int | None) -> list[np.ndarray]:
    n = times.size
    if window is None or window >= n:
        return [np.arange(n)]
    stride = max(1, window // 2 if stride is None else stride)
    return [np.arange(s, s + window) for s in range(0, n - window + 1, stride)]


def _lsq_per_y(X: np.ndarray, d: np.ndarray, cond_cap: float):
    """Per-y least squares; X is [y, time, p], d is [y, time]."""
    ny, _, p = X.shape
    coef = np.full((ny, p), np.nan + 0j)
    cond = np.full(ny, np.inf)
    resid = np.zeros_like(d)
    for i in range(ny):
        c = np.linalg.cond(X[i])
        cond[i] = c
        sol, *_ = np.linalg.lstsq(X[i], d[i], rcond=None)
        resid[i] = d[i] - X[i] @ sol
        if c <= cond_cap:
            coef[i] = sol
    return coef, cond, resid


def extract_interior_profiles(times: Sequence[float], psi: np.ndarray, y: np.ndarray, k: int,
                              flow: ShearFlow, window: int | None = None, stride: int | None = None,
                              cond_cap: float = 1e3, min_samples: int = 9) -> ProfileDecomposition:
    """Three-carrier fit of psi * chi_in with profiles constant per window.

    Model: (e^{-ikb(y)t} alpha + e^{-ikb(0)t} beta + e^{-ikb(1)t} gamma) / (k t)^2.
    """
    times = np.asarray(times, float)
    psi = np.asarray(psi)
    y = np.asarray(y, float)
    chi = CutoffSet.chi_in(y)
    inside = chi > 0
    yi = y[inside]
    data = psi[:, inside] * chi[inside]
    by, b0, b1 = flow.b_of(yi), float(flow.b_of(0.0)), float(flow.b_of(1.0))
    gaps = np.concatenate([np.abs(by - b0), np.abs(by - b1), [abs(b1 - b0)]])
    if gaps.min() <= 0:
        raise IllConditionedWindow("degenerate carrier phases inside the interior cutoff")
    fits = []
    for idx in _windows(times, window, stride):
        t = times[idx]
        if t.size < min_samples:
            raise IllConditionedWindow(f"window has {t.size} < {min_samples} samples")
        if k * (t.max() - t.min()) * gaps.min() < 2 * np.pi / 3 - 1e-12:
            raise IllConditionedWindow("window too short to separate the carriers")
        s = 1.0 / (k * t) ** 2
        X = np.stack([np.exp(-1j * k * by[:, None] * t[None, :]) * s,
                      np.broadcast_to(np.exp(-1j * k * b0 * t) * s, (yi.size, t.size)),
                      np.broadcast_to(np.exp(-1j * k * b1 * t) * s, (yi.size, t.size))], axis=-1)
        d = data[idx].T
        coef, cond, resid = _lsq_per_y(X, d, cond_cap)
        _, _, r1 = _lsq_per_y(X[..., :1], d, np.inf)
        nd = np.linalg.norm(d)
        fits.append(WindowFit(float(t.mean()), t, yi, coef,
                              float(np.linalg.norm(resid) / nd) if nd > 0 else 0.0,
                              float(np.sqrt(np.mean(np.abs(resid) ** 2))),
                              float(np.linalg.norm(r1) / nd) if nd > 0 else 0.0, cond))
    return ProfileDecomposition(int(k), fits, "interior", 3)


def boundary_expansion_fit(times: Sequence[float], psi: np.ndarray, y: np.ndarray, k: int,
                           flow: ShearFlow, orders: int = 4, window: int | None = None,
                           stride: int | None = None, y_range: tuple[float, float] = (0.125, 0.25),
                           cond_cap: float = 1e4, min_samples: int = 9,
                           weight_power: float = 2.0) -> ProfileDecomposition:
    """Two-carrier fit near y = 0 with amplitudes polynomial in 1/(kt) up to order N - 2.

    Model: (e^{-ikb(y)t} sum_j alpha_j (kt)^{1-j} + e^{-ikb(0)t} sum_j beta_j (kt)^{1-j}) / (k t)^2.
    Rows are weighted by (kt)^weight_power so that late times, where the
    expansion is most accurate, are not swamped by the early samples.
    """
    if orders < 3:
        raise ValueError("orders N must be >= 3")
    p = orders - 2
    times = np.asarray(times, float)
    psi = np.asarray(psi)
    y = np.asarray(y, float)
    sel = (y >= y_range[0] - 1e-12) & (y <= y_range[1] + 1e-12) & (y > 0)
    yi = y[sel]
    chi = CutoffSet.chi_b0(yi)
    data = psi[:, sel] * chi
    by, b0 = flow.b_of(yi), float(flow.b_of(0.0))
    gap = float(np.min(np.abs(by - b0)))
    fits = []
    for idx in _windows(times, window, stride):
        t = times[idx]
        if t.size < min_samples:
            raise IllConditionedWindow(f"window has {t.size} < {min_samples} samples")
        if k * (t.max() - t.min()) * gap < 2 * np.pi / 3 - 1e-12:
            raise IllConditionedWindow("window too short to separate the carriers")
        s = 1.0 / (k * t) ** 2
        cols = []
        for j in range(p):
            cols.append(np.exp(-1j * k * by[:, None] * t[None, :]) * (s / (k * t) ** j))
        for j in range(p):
            cols.append(np.broadcast_to(np.exp(-1j * k * b0 * t) * (s / (k * t) ** j), (yi.size, t.size)))
        X = np.stack(cols, axis=-1)
        d = data[idx].T
        wt = (k * t) ** weight_power
        coef, cond, resid = _lsq_per_y(X * wt[None, :, None], d * wt[None, :], cond_cap)
        resid = resid / wt[None, :]
        nd = np.linalg.norm(d)
        fits.append(WindowFit(float(t.mean()), t, yi, coef,
                              float(np.linalg.norm(resid) / nd) if nd > 0 else 0.0,
                              float(np.sqrt(np.mean(np.abs(resid) ** 2))), None, cond))
    dec = ProfileDecomposition(int(k), fits, "boundary", p)
    if len(fits) >= 3 and p >= 2:
        tm = np.array([f.t_mid for f in fits])
        lg = np.log(1 + np.log(np.sqrt(1 + tm**2)))
        for name, col in (("alpha2", 1), ("beta2", p + 1)):
            vals = [np.abs(f.coefficients[:, col]) for f in fits]
            if any(np.all(np.isnan(v)) for v in vals):
                continue
            amp = np.array([np.sqrt(np.nanmean(v ** 2)) for v in vals])
            if np.all(amp > 0) and np.all(np.isfinite(amp)) and np.ptp(lg) > 0:
                dec.log_growth[name] = float(np.polyfit(lg, np.log(amp), 1)[0])
    return dec


def profile_amplitude(values: list[np.ndarray]) -> float:
    """RMS over windows and y of a fitted profile."""
    arr = np.concatenate([np.ravel(v) for v in values])
    arr = arr[np.isfinite(arr)]
    return float(np.sqrt(np.mean(np.abs(arr) ** 2))) if arr.size else float("nan")


# ------------------------------------------------------- Fourier-log bound

@dataclass(frozen=True)
class FourierLogReport:
    m: int
    epsilon: float
    sup_ratio: float
    sup_ratio_refined: float
    change: float
    argmax_xi: float


def _fourier_log_sup(f_fn, m: int, epsilon: float, dx: float, support: tuple[float, float],
                     pad: int, tail_tol: float) -> tuple[float, float]:
    n = int(round((support[1] - support[0]) / dx))
    x = support[0] + dx * np.arange(n + 1)
    h = f_fn(x) * np.log(x + 1j * epsilon) ** m
    xi, H = _spectrum(h, dx, pad)
    mag = np.abs(H)
    if mag.max() == 0:
        return 0.0, 0.0
    nyq = np.abs(xi) >= 0.9 * np.abs(xi).max()
    if mag[nyq].max() > tail_tol * mag.max():
        raise AliasingError("spectrum not decayed at the grid Nyquist frequency")
    br = np.sqrt(1 + xi**2)
    env = (1 + np.log(br) ** (m - 1)) / br
    ratio = mag / env
    i = int(np.argmax(ratio))
    return float(ratio[i]), float(xi[i])


def fourier_log_check(f_fn, m: int, epsilon: float = 1e-3, dx: float | None = None,
                      support: tuple[float, float] = (-1.0, 1.0), pad: int = 8,
                      tail_tol: float = 1e-3) -> FourierLogReport:
    """sup_xi |h^(xi)| <xi> / (1 + log^{m-1}<xi>) for h = f log^m(x + i eps), and its grid-doubling change."""
    if m not in (1, 2, 3):
        raise ValueError("m must be 1, 2 or 3")
    if pad < 8:
        raise ValueError("zero-padding factor must be >= 8")
    dx = epsilon / 3 if dx is None else dx
    s1, xi1 = _fourier_log_sup(f_fn, m, epsilon, dx, support, pad, tail_tol)
    s2, _ = _fourier_log_sup(f_fn, m, epsilon, dx / 2, support, pad, tail_tol)
    change = abs(s2 - s1) / s1 if s1 > 0 else 0.0
    return FourierLogReport(m, epsilon, s1, s2, float(change), xi1)
