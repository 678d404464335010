"""Stream function reconstruction from the spectral density."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .density import DensityLadder, Extrapolation, epsilon_extrapolate
from .flow import CutoffSet, ShearFlow


class UnderResolvedError(ValueError):
    def __init__(self, required_dw: float, actual_dw: float):
        super().__init__(f"oscillation under-resolved: need dw <= {required_dw:.3g}, have {actual_dw:.3g}")
        self.required_dw = required_dw


def _filon_weights(theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """int_0^1 e^{-i theta x} (1-x) dx and int_0^1 e^{-i theta x} x dx."""
    theta = np.asarray(theta, float)
    small = np.abs(theta) < 0.5
    ts = np.where(small, theta, 0.0)
    z = -1j * ts
    w0 = np.zeros(theta.shape, complex)
    w1 = np.zeros(theta.shape, complex)
    term = np.ones(theta.shape, complex)
    for n in range(16):
        w0 += term / ((n + 1) * (n + 2))
        w1 += term / (n + 2)
        term = term * z / (n + 1)
    tl = np.where(small, 1.0, theta)
    e = np.exp(-1j * tl)
    w1_l = 1j * e / tl - (1 - e) / tl**2
    w0_l = (1 - e) / (1j * tl) - w1_l
    return np.where(small, w0, w0_l), np.where(small, w1, w1_l)


def filon_trapezoid(w: np.ndarray, g: np.ndarray, a: float, axis: int = -1) -> np.ndarray:
    """int e^{-i a w} g(w) dw with g piecewise linear on the (nonuniform) nodes w."""
    w = np.asarray(w, float)
    g = np.moveaxis(np.asarray(g), axis, -1)
    dw = np.diff(w)
    w0, w1 = _filon_weights(a * dw)
    ph = np.exp(-1j * a * w[:-1]) * dw
    return (g[..., :-1] * (ph * w0) + g[..., 1:] * (ph * w1)).sum(axis=-1)


def check_resolution(w: np.ndarray, k: int, t: float, filon: bool = True) -> None:
    dw = float(np.max(np.diff(w)))
    if filon:
        need = 2 * np.pi / max(abs(k * t), 1e-300)
    else:
        need = np.pi / (8 * max(abs(k * t), 1e-300))
    if dw > need:
        raise UnderResolvedError(need, dw)


@dataclass(frozen=True, eq=False)
class StreamSnapshot:
    t: float
    k: int
    y: np.ndarray
    psi: np.ndarray
    parts: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None
    epsilon_error: np.ndarray | None = None
    per_rung: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True, eq=False)
class VelocitySnapshot:
    t: float
    y: np.ndarray
    ux: np.ndarray
    uy: np.ndarray


def _channel_columns(w: np.ndarray, flow: ShearFlow) -> np.ndarray:
    b0, b1 = float(flow.b_of(0.0)), float(flow.b_of(1.0))
    return np.nonzero((w >= b0 - 1e-12) & (w <= b1 + 1e-12))[0]


def _rung_integrals(ladder: DensityLadder, y: np.ndarray, times: Sequence[float], flow: ShearFlow,
                    weights: Callable[[np.ndarray], np.ndarray] | None = None) -> np.ndarray:
    """Array [rung, time, y] of -1/(2 pi i) int e^{-ikwt} [psi^- - psi^+](y, w) W(w) dw."""
    k = ladder.k
    out = np.zeros((len(ladder.minus), len(times), y.size), complex)
    for r, (fm, fp) in enumerate(zip(ladder.minus, ladder.plus)):
        cols = _channel_columns(fm.grid.w, flow)
        w = fm.grid.w[cols]
        rows = fm.row_index(y)
        g = fm.theta[np.ix_(rows, cols)] - fp.theta[np.ix_(rows, cols)]
        if weights is not None:
            g = g * weights(w)[None, :]
        for i, t in enumerate(times):
            check_resolution(w, k, t)
            out[r, i] = -filon_trapezoid(w, g, k * t) / (2j * np.pi)
    return out


def output_nodes(ladder: DensityLadder) -> np.ndarray:
    """Nodes of the coarsest rung inside [0, 1]; they are nodes of every rung."""
    g = ladder.minus[0].grid
    m = g.points_per_unit
    return np.arange(0, m + 1) / m


def stream_from_density(ladder: DensityLadder, times: Sequence[float], flow: ShearFlow,
                        cutoffs: CutoffSet | None = None, y: np.ndarray | None = None,
                        order: int = 2, split: bool = False) -> list[StreamSnapshot]:
    """psi_k(t, y) for each requested t; epsilon -> 0 is taken after the w integral."""
    y = output_nodes(ladder) if y is None else np.asarray(y, float)
    eps = ladder.epsilons
    per = _rung_integrals(ladder, y, times, flow)
    parts_all = None
    if split:
        if cutoffs is None:
            raise ValueError("region split needs the cutoff set")
        parts_all = [_rung_integrals(ladder, y, times, flow, u) for u in
                     (cutoffs.upsilon1, cutoffs.upsilon2, cutoffs.upsilon3)]
    snaps = []
    for i, t in enumerate(times):
        ex = epsilon_extrapolate(per[:, i], eps, order=order, strict=False)
        parts = None
        if parts_all is not None:
            parts = tuple(epsilon_extrapolate(p[:, i], eps, order=order, strict=False).limit
                          for p in parts_all)
        snaps.append(StreamSnapshot(float(t), ladder.k, y, ex.limit, parts, ex.error, per[:, i]))
    return snaps


def split_stream_regions(ladder: DensityLadder, t: float, flow: ShearFlow, cutoffs: CutoffSet,
                         y: np.ndarray | None = None, order: int = 2):
    snap = stream_from_density(ladder, [t], flow, cutoffs, y, order=order, split=True)[0]
    return snap.parts


def velocity_fields(snapshot: StreamSnapshot) -> VelocitySnapshot:
    y, psi = snapshot.y, snapshot.psi
    ux = -np.gradient(psi, y, edge_order=2)
    return VelocitySnapshot(snapshot.t, y, ux, 1j * snapshot.k * psi)


def velocity_from_psi(y: np.ndarray, psi: np.ndarray, k: int, t: float = 0.0) -> VelocitySnapshot:
    return velocity_fields(StreamSnapshot(t, k, np.asarray(y, float), np.asarray(psi)))


# ---------------------------------------------------------- demodulation

@dataclass(frozen=True, eq=False)
class Demodulated:
    t: float
    v: np.ndarray
    coefficient: np.ndarray
    norm: float


def demodulate_kernel_integral(h: Callable[[np.ndarray, np.ndarray], np.ndarray], p: int, k: int,
                               t: float, epsilon: float, v: np.ndarray, w: np.ndarray,
                               pole: str = "moving", iota: int = 1, b0: float = 0.0) -> Demodulated:
    """Oscillatory kernel integral with its carrier removed.

    Computes I(v) = int e^{-ikwt} h(v-w, w) log^p(x + i iota eps)/(x + i iota eps) dw
    with x = v - w (moving pole) or x = b0 - w (boundary pole), then returns
    e^{ikvt} I(v) or e^{ik b0 t} I(v).
    """
    if p not in (0, 1, 2, 3):
        raise ValueError("p must be in {0, 1, 2, 3}")
    v = np.asarray(v, float)
    w = np.asarray(w, float)
    check_resolution(w, k, t)
    if pole not in ("moving", "boundary0"):
        raise ValueError("pole must be 'moving' or 'boundary0'")
    x = (v[:, None] - w[None, :]) if pole == "moving" else (b0 - w)[None, :].repeat(v.size, 0)
    z = x + 1j * iota * epsilon
    g = h(v[:, None] - w[None, :], w[None, :]) * np.log(z) ** p / z
    integral = filon_trapezoid(w, g, k * t)
    carrier = np.exp(1j * k * v * t) if pole == "moving" else np.exp(1j * k * b0 * t)
    coef = carrier * integral
    dv = np.gradient(v) if v.size > 1 else np.ones(1)
    return Demodulated(float(t), v, coef, float(np.sqrt(np.sum(np.abs(coef) ** 2 * dv))))


def log_growth_exponent(ts: np.ndarray, norms: np.ndarray, k: int) -> float:
    """Exponent q in norm ~ C (1 + log<kt>)^q by least squares."""
    ts = np.asarray(ts, float)
    lg = np.log(1 + np.log(np.sqrt(1 + (k * ts) ** 2)))
    A = np.vstack([lg, np.ones_like(lg)]).T
    q, _ = np.linalg.lstsq(A, np.log(np.asarray(norms)), rcond=None)[0]
    return float(q)


def extrapolate_series(values: Sequence[np.ndarray], epsilons: Sequence[float], order: int = 2) -> Extrapolation:
    return epsilon_extrapolate(values, epsilons, order=order, strict=False)
