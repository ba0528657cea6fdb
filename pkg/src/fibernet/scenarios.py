"""Benchmark scenarios: weakened cantilever bar, tensile and notched networks."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .beam import FiberSection, reference_fiber
from .element import SchemeConfig
from .netgen import NetworkSpec, NotchSpec, generate
from .network import NetworkModel, chain_model

SCENARIOS = ("cantilever", "tensile", "notched", "network")

# Bar: E = 1 MPa, A = 1 mm², N̄ = 1 N, L = 0.1 mm; the failing element is 1% weaker.
CANTILEVER_LENGTH = 0.1
CANTILEVER_WEAKENING = 0.99
CANTILEVER_GF = (0.05, 0.1, 0.2)

TENSILE_DELTA = 9.0


def cantilever_sections(G_f: float) -> tuple[FiberSection, FiberSection]:
    """(regular, weakened) sections; the weak one keeps G_f and lowers N̄ by 1%."""
    sec = FiberSection.square(1.0, E=1.0, G_shear=0.5, k_shear=5.0 / 6.0, N_bar=1.0, G_f=G_f,
                              name="bar")
    return sec, sec.with_strength(CANTILEVER_WEAKENING * sec.N_bar)


def cantilever_model(G_f: float, n_elements: int = 1) -> NetworkModel:
    sec, weak = cantilever_sections(G_f)
    return chain_model(sec, CANTILEVER_LENGTH, n_elements, weak_section=weak)


def cantilever_oracle(u, G_f: float):
    """Closed-form reaction of the weakened bar at grip displacement ``u``.

    Elastic up to the weak strength, then the localized hinge softens while
    the rest of the bar unloads elastically:

        F = (N̄_w/|H_w| - u) / (1/|H_w| - L/EA),   zero once F would be negative.
    """
    sec, weak = cantilever_sections(G_f)
    k = sec.EA / CANTILEVER_LENGTH
    u = np.asarray(u, dtype=float)
    u_peak = weak.N_bar / k
    inv_h = 1.0 / abs(weak.H_soft)
    soft = (weak.N_bar * inv_h - u) / (inv_h - CANTILEVER_LENGTH / sec.EA)
    return np.where(u <= u_peak, k * u, np.maximum(soft, 0.0))


def cantilever_delta(G_f: float) -> float:
    """Default end displacement: 1.5x past the point where the weak hinge is fully open."""
    _, weak = cantilever_sections(G_f)
    return 1.5 * max(weak.N_bar * CANTILEVER_LENGTH / weak.EA, 2.0 * weak.G_f / weak.N_bar)


@dataclass
class ScenarioConfig:
    scenario: str = "cantilever"
    scheme: str = "hybrid"
    h_tol: float = 0.01
    n_steps: int = 200
    delta_0: float | None = None
    seed: int = 0
    density: float = 1000.0
    gf: float | None = None
    width: float = 18.0
    height: float = 6.0
    elements: list[int] = field(default_factory=lambda: [1, 10])
    notch_angle: float = 20.0
    notch_depth: float | None = None
    network: str | None = None
    max_iters: int = 500
    tol_rel: float = 1e-6
    tol_abs: float | None = None
    bisect: bool = False
    checkpoints: list[int] = field(default_factory=list)
    output: str | None = None
    plot: bool = False
    overwrite: bool = False

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        self.scheme_config()
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.gf is not None and not self.gf > 0:
            raise ValueError("gf must be positive")
        if self.scenario == "network" and not self.network:
            raise ValueError("the network scenario needs a network file")
        if self.delta_0 is not None and not math.isfinite(self.delta_0):
            raise ValueError("delta_0 must be finite")
        if any(n < 1 for n in self.elements):
            raise ValueError("element counts must be >= 1")

    @classmethod
    def field_names(cls) -> set[str]:
        return {f.name for f in fields(cls)}

    @classmethod
    def from_dict(cls, data: dict) -> ScenarioConfig:
        unknown = set(data) - cls.field_names()
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    def scheme_config(self) -> SchemeConfig:
        if ":" in self.scheme:
            return SchemeConfig.parse(self.scheme)
        return SchemeConfig(self.scheme, self.h_tol)

    def resolved_gf(self) -> float:
        if self.gf is not None:
            return self.gf
        return 0.1 if self.scenario != "cantilever" else CANTILEVER_GF[0]

    def resolved_delta(self) -> float:
        if self.delta_0 is not None:
            return self.delta_0
        if self.scenario == "cantilever":
            return cantilever_delta(self.resolved_gf())
        return TENSILE_DELTA

    def network_spec(self) -> NetworkSpec:
        notch = NotchSpec(self.notch_angle, self.notch_depth) if self.scenario == "notched" else None
        return NetworkSpec(width=self.width, height=self.height, density=self.density,
                           fiber=reference_fiber(self.resolved_gf()), seed=self.seed, notch=notch)


def build_models(cfg: ScenarioConfig) -> dict[str, NetworkModel]:
    """Named models for one scenario (the cantilever has one per mesh)."""
    if cfg.scenario == "cantilever":
        return {f"cantilever_{n}el": cantilever_model(cfg.resolved_gf(), n) for n in cfg.elements}
    if cfg.scenario == "network":
        return {"network": NetworkModel.load(cfg.network)}
    return {cfg.scenario: generate(cfg.network_spec())}
