"""Background shear flows, cutoff families and initial vorticity modes.

Everything here is evaluated from closed forms; grid samples are cached only
for bookkeeping and for locating supports.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np

Y_LO, Y_HI = -2.5, 3.5
DEFAULT_POINTS_PER_UNIT = 341  # spacing 1/341; interior nodes of [-2.5, 3.5]


def uniform_grid(points_per_unit: int = DEFAULT_POINTS_PER_UNIT,
                 lo: float = Y_LO, hi: float = Y_HI) -> np.ndarray:
    """Uniform grid with spacing 1/points_per_unit; 0 and 1 are nodes."""
    m = int(points_per_unit)
    if m < 2:
        raise ValueError("points_per_unit must be >= 2")
    i0, i1 = int(np.ceil(lo * m - 1e-9)), int(np.floor(hi * m + 1e-9))
    return np.arange(i0, i1 + 1) / m


# ---------------------------------------------------------------- mollifiers

def _mollifier(s: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """exp(1 - 1/(1-s^2)) on |s|<1 with first and second s-derivatives."""
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1.0
    q = np.where(inside, 1.0 - s * s, 1.0)
    phi = np.where(inside, np.exp(1.0 - 1.0 / q), 0.0)
    d1 = phi * (-2.0 * s / q**2)
    d2 = phi * (4.0 * s * s / q**4 - 2.0 / q**2 - 8.0 * s * s / q**3)
    return phi, np.where(inside, d1, 0.0), np.where(inside, d2, 0.0)


def smooth_step(x) -> np.ndarray:
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=float)
    xa = np.clip(x, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        f = np.where(xa > 0, np.exp(-1.0 / np.where(xa > 0, xa, 1.0)), 0.0)
        g = np.where(xa < 1, np.exp(-1.0 / np.where(xa < 1, 1.0 - xa, 1.0)), 0.0)
        out = f / (f + g)
    return np.where(x <= 0, 0.0, np.where(x >= 1, 1.0, out))


# ---------------------------------------------------------------------- flows

@dataclass(frozen=True, eq=False)
class ShearFlow:
    family: str
    params: dict
    y: np.ndarray
    b: np.ndarray
    db: np.ndarray
    d2b: np.ndarray
    c_min: float
    support_d2b: tuple[float, float]
    _eval: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray]] = field(repr=False)

    def evaluate(self, y) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self._eval(np.asarray(y, dtype=float))

    def b_of(self, y) -> np.ndarray:
        return self._eval(np.asarray(y, dtype=float))[0]

    def db_of(self, y) -> np.ndarray:
        return self._eval(np.asarray(y, dtype=float))[1]

    def d2b_of(self, y) -> np.ndarray:
        return self._eval(np.asarray(y, dtype=float))[2]

    @property
    def is_couette(self) -> bool:
        return self.support_d2b[0] > self.support_d2b[1]

    def B(self, v) -> np.ndarray:
        """B(v) = b'(b^{-1}(v))."""
        return self.db_of(inverse_b(self, v))

    def dB(self, v) -> np.ndarray:
        """d/dv B(v) = b''/b' at b^{-1}(v)."""
        _, d1, d2 = self.evaluate(inverse_b(self, v))
        return d2 / d1

    @property
    def range(self) -> tuple[float, float]:
        return float(self.b[0]), float(self.b[-1])


def _couette_eval(y):
    return y.copy(), np.ones_like(y), np.zeros_like(y)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(120)
_MOLL_MASS = float(np.dot(np.polynomial.legendre.leggauss(400)[1],
                          _mollifier(np.polynomial.legendre.leggauss(400)[0])[0]))


def _gauss(fn, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """int_lo^hi fn, vectorised over interval endpoints."""
    lo, hi = np.broadcast_arrays(np.asarray(lo, float), np.asarray(hi, float))
    half = 0.5 * (hi - lo)
    nodes = (lo + half)[..., None] + half[..., None] * _GL_X
    return half * (fn(nodes) @ _GL_W)


def _step_profile(s: np.ndarray):
    """Unit-mass mollifier m(s), its primitive P(s) - 1/2 and H(s) = int_0^s (P - 1/2).

    H is even and grows like (|s| - 1)/2 + H(1) outside [-1, 1].
    """
    s = np.asarray(s, float)
    m = _mollifier(s)[0] / _MOLL_MASS
    dm = _mollifier(s)[1] / _MOLL_MASS
    sc = np.clip(s, -1.0, 1.0)
    dens = lambda x: _mollifier(x)[0] / _MOLL_MASS
    P = _gauss(dens, np.full_like(sc, -1.0), sc) - 0.5
    first = _gauss(lambda x: x * dens(x), np.zeros_like(sc), sc)
    H = sc * P - first
    H = H + (np.abs(s) - 1.0).clip(min=0.0) * 0.5
    return m, dm, P, H


def _perturbed_eval(a: float, center: float, width: float):
    """b = y + a*width*H(s), so b' = 1 + a(P(s) - 1/2) and b'' = a m(s)/width."""
    def ev(y):
        s = (y - center) / width
        m, _, P, H = _step_profile(s)
        return y + a * width * H, 1.0 + a * P, a * m / width
    return ev


def _inflected_eval(a: float, center: float, width: float):
    def ev(y):
        phi, d1, d2 = _mollifier((y - center) / width)
        return y + a * phi, 1.0 + a * d1 / width, a * d2 / width**2
    return ev


def build_flow(family: str = "couette", *, a: float = 0.0, center: float = 0.5,
               width: float = 0.2, points_per_unit: int = DEFAULT_POINTS_PER_UNIT) -> ShearFlow:
    """Construct a monotone shear flow.

    ``perturbed_couette``: b'' = a * m((y - center)/width)/width with m the unit
    mass exponential mollifier, so b'' has one sign and b' runs from 1 - a/2 to
    1 + a/2 (b'(center) = 1).  ``inflected_couette``: b = y + a*eta with eta the
    symmetric mollifier bump; b'' changes sign, which generally produces
    unstable modes and is kept for exercising the spectrum scan.
    """
    y = uniform_grid(points_per_unit)
    if family == "couette":
        ev, params, supp = _couette_eval, {}, (np.inf, -np.inf)
    elif family in ("perturbed_couette", "inflected_couette"):
        if width <= 0:
            raise ValueError("bump width must be positive")
        lo, hi = center - width, center + width
        if lo < -1.0 or hi > 2.0:
            raise ValueError(f"bump support [{lo}, {hi}] leaves [-1, 2]")
        ev = (_perturbed_eval if family == "perturbed_couette" else _inflected_eval)(a, center, width)
        params = {"a": float(a), "center": float(center), "width": float(width)}
        supp = (lo, hi) if a != 0 else (np.inf, -np.inf)
    else:
        raise ValueError(f"unknown flow family {family!r}")

    b, db, d2b = ev(y)
    # fine scan of the bump region for the monotonicity bound
    if np.isfinite(supp[0]):
        fine = np.linspace(supp[0], supp[1], 20001)
        c_min = float(min(ev(fine)[1].min(), db.min()))
    else:
        c_min = float(db.min())
    if c_min <= 0:
        raise ValueError(f"monotonicity violated: min b' = {c_min:.4g}")
    return ShearFlow(family, params, y, b, db, d2b, c_min, supp, ev)


def inverse_b(flow: ShearFlow, v) -> np.ndarray:
    """Solve b(y) = v by safeguarded Newton iteration (vectorised)."""
    v = np.asarray(v, dtype=float)
    lo, hi = flow.range
    span = 1e-12 * (1 + max(abs(lo), abs(hi)))
    if np.any(v < lo - span) or np.any(v > hi + span):
        raise ValueError("v outside the range of b on the extended grid")
    if flow.family == "couette":
        return v.copy()
    y = np.interp(v, flow.b, flow.y)
    for _ in range(60):
        b, d1, _ = flow.evaluate(y)
        step = (b - v) / d1
        y = y - step
        if np.all(np.abs(b - v) <= 1e-13 * (1 + np.abs(v))):
            break
    b = flow.b_of(y)
    if not np.all(np.abs(b - v) <= 1e-12 * (1 + np.abs(v))):
        raise RuntimeError("inverse_b failed to converge")
    return y


# -------------------------------------------------------------------- cutoffs

@dataclass(frozen=True, eq=False)
class CutoffSet:
    k: int
    delta0: float
    flow: ShearFlow

    def psi_k(self, y) -> np.ndarray:
        """1 on [0,1], vanishing outside (-d, 1+d) with d = delta0/k."""
        y = np.asarray(y, dtype=float)
        d = self.delta0 / self.k
        return smooth_step((y + d) / d) * smooth_step((1 + d - y) / d)

    @property
    def psi_support(self) -> tuple[float, float]:
        d = self.delta0 / self.k
        return -d, 1 + d

    def _edges(self):
        b = self.flow.b_of
        d = self.delta0
        return b(d), b(2 * d), b(1 - 2 * d), b(1 - d)

    def upsilon1(self, w) -> np.ndarray:
        e0, e1, _, _ = self._edges()
        return 1.0 - smooth_step((np.asarray(w, float) - e0) / (e1 - e0))

    def upsilon3(self, w) -> np.ndarray:
        _, _, e2, e3 = self._edges()
        return smooth_step((np.asarray(w, float) - e2) / (e3 - e2))

    def upsilon2(self, w) -> np.ndarray:
        return (1.0 - self.upsilon1(w)) - self.upsilon3(w)

    def upsilon(self, w) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        u1, u3 = self.upsilon1(w), self.upsilon3(w)
        return u1, (1.0 - u1) - u3, u3

    @staticmethod
    def chi_in(y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return smooth_step((y - 1 / 16) * 16) * smooth_step((15 / 16 - y) * 16)

    @staticmethod
    def chi_b0(y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return smooth_step((y + 0.25) * 8) * smooth_step((0.25 - y) * 8)

    @staticmethod
    def chi_b1(y) -> np.ndarray:
        return CutoffSet.chi_b0(1.0 - np.asarray(y, dtype=float))


def build_cutoffs(k: int, delta0: float = 0.05, flow: ShearFlow | None = None) -> CutoffSet:
    if int(k) != k or k < 1:
        raise ValueError("k must be a positive integer")
    if not 0 < delta0 < 0.1:
        raise ValueError("delta0 must lie in (0, 1/10)")
    return CutoffSet(int(k), float(delta0), flow if flow is not None else build_flow("couette"))


# ------------------------------------------------------------------ vorticity

Profile = Literal["bump", "gaussian", "constant", "polynomial", "cosine"]


@dataclass(frozen=True)
class VorticitySpec:
    profile: str = "bump"
    center: float = 0.5
    width: float = 0.2
    coeffs: tuple[float, ...] = (0.0, 1.0, -1.0)  # polynomial: c0 + c1 y + c2 y^2 ...
    vanish: tuple[int, int] = (0, 0)
    amplitude: complex = 1.0
    extension_width: float = 1.0


def _profile_fn(spec: VorticitySpec) -> Callable[[np.ndarray], np.ndarray]:
    p = spec.profile
    if p == "bump":
        return lambda y: _mollifier((y - spec.center) / spec.width)[0]
    if p == "gaussian":
        return lambda y: np.exp(-0.5 * ((y - spec.center) / spec.width) ** 2)
    if p == "constant":
        return lambda y: np.ones_like(y)
    if p == "polynomial":
        c = np.asarray(spec.coeffs, dtype=float)[::-1]
        return lambda y: np.polyval(c, y)
    if p == "cosine":
        return lambda y: np.cos(np.pi * (y - spec.center) / spec.width)
    raise ValueError(f"unknown vorticity profile {p!r}")


@dataclass(frozen=True, eq=False)
class VorticityMode:
    k: int
    spec: VorticitySpec
    y: np.ndarray
    omega0: np.ndarray
    boundary_values: tuple[complex, complex]
    flow: ShearFlow = field(repr=False)
    _fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)

    def __call__(self, y) -> np.ndarray:
        return self._fn(np.asarray(y, dtype=float))

    def f0(self, v) -> np.ndarray:
        """f0(v) = omega0(b^{-1}(v))."""
        return self._fn(inverse_b(self.flow, v))

    def derivative(self, y0: float, order: int = 1, h: float = 1e-3) -> complex:
        """High-order central difference of the extended profile."""
        st = {1: ([1, -8, 0, 8, -1], 12 * h),
              2: ([-1, 16, -30, 16, -1], 12 * h * h)}[order]
        pts = y0 + h * np.arange(-2, 3)
        return complex(np.dot(st[0], self._fn(pts)) / st[1])

    @property
    def support(self) -> tuple[float, float]:
        nz = np.nonzero(np.abs(self.omega0) > 0)[0]
        if nz.size == 0:
            return (0.0, 0.0)
        return float(self.y[nz[0]]), float(self.y[nz[-1]])


def build_vorticity(spec: VorticitySpec | dict | None, flow: ShearFlow, k: int = 1) -> VorticityMode:
    """Initial mode: profile * y^p0 (1-y)^p1 * plateau, plateau = 1 on [0,1]."""
    if spec is None:
        spec = VorticitySpec()
    elif isinstance(spec, dict):
        spec = VorticitySpec(**{**spec, **({"coeffs": tuple(spec["coeffs"])} if "coeffs" in spec else {}),
                                **({"vanish": tuple(spec["vanish"])} if "vanish" in spec else {})})
    p0, p1 = spec.vanish
    if p0 not in (0, 1, 2) or p1 not in (0, 1, 2):
        raise ValueError("vanishing orders must be in {0, 1, 2}")
    L = float(spec.extension_width)
    if not 0 < L <= 2:
        raise ValueError("extension_width must be in (0, 2]")
    base = _profile_fn(spec)
    amp = complex(spec.amplitude)

    def fn(y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        plateau = smooth_step((y + L) / L) * smooth_step((1 + L - y) / L)
        val = base(y) * y**p0 * (1 - y) ** p1 * plateau
        return np.asarray(amp * val, dtype=complex)

    y = flow.y
    om = fn(y)
    return VorticityMode(int(k), spec, y, om, (complex(fn(np.array(0.0))), complex(fn(np.array(1.0)))),
                         flow, fn)


def mass(mode: VorticityMode, n: int = 4001) -> complex:
    y = np.linspace(0.0, 1.0, n)
    return complex(np.trapezoid(mode(y), y))


def vorticity_pair(flow: ShearFlow, k: int, specs: Sequence[VorticitySpec]) -> list[VorticityMode]:
    """Modes rescaled to share the interior mass of the first one."""
    modes = [build_vorticity(s, flow, k) for s in specs]
    m0 = mass(modes[0])
    out = [modes[0]]
    for s, md in zip(specs[1:], modes[1:]):
        scale = m0 / mass(md)
        out.append(build_vorticity(VorticitySpec(**{**s.__dict__, "amplitude": complex(s.amplitude) * scale}),
                                   flow, k))
    return out
