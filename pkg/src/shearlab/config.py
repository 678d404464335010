"""Scenario schema, loading and hashing."""
from __future__ import annotations

import hashlib
import json
import sys
from importlib import resources
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .density import DEFAULT_LADDER
from .flow import VorticitySpec, build_flow

CHECK_IDS = tuple(f"A{i}" for i in range(1, 11))


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class FlowConfig(_Strict):
    family: Literal["couette", "perturbed_couette", "inflected_couette"] = "couette"
    a: float = 0.0
    center: float = 0.5
    width: float = Field(0.2, gt=0)

    @model_validator(mode="after")
    def _monotone(self):
        # build_flow rejects non-monotone or badly supported profiles
        build_flow(self.family, a=self.a, center=self.center, width=self.width, points_per_unit=64)
        return self


class VorticityConfig(_Strict):
    profile: Literal["bump", "gaussian", "constant", "polynomial", "cosine"] = "bump"
    center: float = 0.5
    width: float = Field(0.2, gt=0)
    coeffs: tuple[float, ...] = (0.0, 1.0, -1.0)
    vanish: tuple[int, int] = (0, 0)
    amplitude: float = 1.0
    extension_width: float = Field(1.0, gt=0, le=2)

    @field_validator("vanish")
    @classmethod
    def _orders(cls, v):
        if any(p not in (0, 1, 2) for p in v):
            raise ValueError("vanishing orders must be in {0, 1, 2}")
        return v

    def spec(self) -> VorticitySpec:
        return VorticitySpec(self.profile, self.center, self.width, tuple(self.coeffs),
                             tuple(self.vanish), self.amplitude, self.extension_width)


class GridConfig(_Strict):
    oracle_points: int = Field(1600, ge=32)
    oracle_method: Literal["fd", "chebyshev"] = "fd"
    base_points: int | None = Field(None, ge=8)
    kappa: float = Field(3.0, ge=3.0)
    delta0: float = Field(0.05, gt=0, lt=0.25)


class LadderConfig(_Strict):
    epsilons: tuple[float, ...] = DEFAULT_LADDER
    order: int = Field(2, ge=1)

    @model_validator(mode="after")
    def _decreasing(self):
        e = self.epsilons
        if len(e) < 3 or any(b >= a for a, b in zip(e, e[1:])) or e[-1] <= 0:
            raise ValueError("epsilons must be >= 3 positive, strictly decreasing values")
        if self.order + 1 > len(e):
            raise ValueError("extrapolation order needs order + 1 rungs")
        return self


class ProfilesConfig(_Strict):
    interior_window: tuple[float, float] = (400.0, 600.0)
    interior_samples: int = Field(81, ge=9)
    boundary_window: tuple[float, float] = (20.0, 200.0)
    boundary_samples: int = Field(161, ge=9)
    orders: int = Field(4, ge=3)

    @model_validator(mode="after")
    def _windows(self):
        for lo, hi in (self.interior_window, self.boundary_window):
            if not 0 < lo < hi:
                raise ValueError("profile windows need 0 < start < end")
        return self


class Scenario(_Strict):
    name: str = "scenario"
    flow: FlowConfig = FlowConfig()
    vorticity: VorticityConfig = VorticityConfig()
    k: tuple[int, ...] = (1,)
    grid: GridConfig = GridConfig()
    ladder: LadderConfig = LadderConfig()
    profiles: ProfilesConfig = ProfilesConfig()
    times: tuple[float, ...] = (0.0, 1.0, 2.0, 5.0, 10.0)
    checks: tuple[str, ...] = ()
    seed: int = 0
    memory_cap_mb: float = Field(2048.0, gt=0)

    @field_validator("k")
    @classmethod
    def _modes(cls, v):
        if not v or any(int(x) < 1 for x in v):
            raise ValueError("k must list positive integers")
        return tuple(int(x) for x in v)

    @field_validator("times")
    @classmethod
    def _times(cls, v):
        if not v or any(t < 0 for t in v):
            raise ValueError("times must be nonnegative")
        return tuple(sorted(set(float(t) for t in v)))

    @field_validator("checks")
    @classmethod
    def _checks(cls, v):
        return parse_checks(v)


def parse_checks(items) -> tuple[str, ...]:
    if isinstance(items, str):
        items = [s for s in items.split(",") if s.strip()]
    out = []
    for it in items:
        it = it.strip().upper()
        if it == "NONE":
            continue
        if it == "ALL":
            out.extend(CHECK_IDS)
            continue
        if it not in CHECK_IDS:
            raise ValueError(f"unknown check {it!r}; expected one of {', '.join(CHECK_IDS)}")
        out.append(it)
    return tuple(dict.fromkeys(out))


def canonical_json(scenario: Scenario) -> str:
    return json.dumps(scenario.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))


def config_hash(scenario: Scenario) -> str:
    return hashlib.sha256(canonical_json(scenario).encode()).hexdigest()


def bundled_scenarios() -> list[str]:
    root = resources.files("shearlab") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def load_scenario(path: str | Path) -> Scenario:
    """Read a TOML scenario; a bare name picks a bundled scenario."""
    p = Path(path)
    if not p.exists() and p.suffix == "" and str(path) in bundled_scenarios():
        text = (resources.files("shearlab") / "scenarios" / f"{path}.toml").read_text()
    else:
        text = p.read_text()
    return Scenario.model_validate(tomllib.loads(text))
