"""Two-node 3D Timoshenko beam with one Gauss point at mid-span.

DOF order per node is (ux, uy, uz, θx, θy, θz); the element vector stacks
node 1 then node 2. Units are N, mm, MPa throughout.

Generalized strains (ε, γy, γz, κx, κy, κz) and their conjugate resultants
(N, Qy, Qz, Mx, My, Mz) share one ordering. With a single quadrature point
every integral over the element reduces to ``l_e * f(l_e / 2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import InvalidGeometryError

NDOF_NODE = 6
NDOF_ELEM = 12
AXIAL_DOFS = (0, 6)


@dataclass(frozen=True)
class FiberSection:
    """Elastic and softening properties of one beam cross-section.

    Exactly one of ``H_soft`` and ``G_f`` may be left as None; the other is
    derived from ``G_f = N_bar**2 / (2 |H_soft|)``. Passing both is allowed
    only if they agree to 1e-12 relative.
    """

    E: float
    G_shear: float
    k_shear: float
    A: float
    J: float
    I11: float
    I22: float
    N_bar: float
    H_soft: float | None = None
    G_f: float | None = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        for attr in ("E", "G_shear", "A", "J", "I11", "I22", "N_bar"):
            val = getattr(self, attr)
            if not (math.isfinite(val) and val > 0):
                raise ValueError(f"FiberSection.{attr} must be positive and finite, got {val!r}")
        if not 0 < self.k_shear <= 1:
            raise ValueError(f"k_shear must lie in (0, 1], got {self.k_shear!r}")
        H, Gf = self.H_soft, self.G_f
        if H is None and Gf is None:
            raise ValueError("FiberSection needs H_soft or G_f")
        if H is None:
            if not Gf > 0:
                raise ValueError(f"G_f must be positive, got {Gf!r}")
            H = -self.N_bar**2 / (2.0 * Gf)
        elif Gf is None:
            if not H < 0:
                raise ValueError(f"H_soft must be negative, got {H!r}")
            Gf = self.N_bar**2 / (2.0 * abs(H))
        else:
            if not H < 0:
                raise ValueError(f"H_soft must be negative, got {H!r}")
            implied = self.N_bar**2 / (2.0 * abs(H))
            if abs(implied - Gf) > 1e-12 * Gf:
                raise ValueError(f"G_f={Gf!r} inconsistent with H_soft={H!r} (implies {implied!r})")
        object.__setattr__(self, "H_soft", float(H))
        object.__setattr__(self, "G_f", float(Gf))

    @property
    def EA(self) -> float:
        return self.E * self.A

    @classmethod
    def square(cls, side: float, E: float, G_shear: float, k_shear: float, N_bar: float,
               G_f: float | None = None, H_soft: float | None = None, name: str = "") -> FiberSection:
        """Square solid section; J is taken as the polar moment I11 + I22."""
        A = side * side
        inertia = side**4 / 12.0
        return cls(E=E, G_shear=G_shear, k_shear=k_shear, A=A, J=2.0 * inertia,
                   I11=inertia, I22=inertia, N_bar=N_bar, H_soft=H_soft, G_f=G_f, name=name)

    def with_strength(self, N_bar: float, keep: str = "G_f") -> FiberSection:
        """Copy with a different elastic limit, holding either G_f or H_soft fixed."""
        if keep == "G_f":
            return FiberSection(self.E, self.G_shear, self.k_shear, self.A, self.J, self.I11,
                                self.I22, N_bar, G_f=self.G_f, name=self.name)
        if keep == "H_soft":
            return FiberSection(self.E, self.G_shear, self.k_shear, self.A, self.J, self.I11,
                                self.I22, N_bar, H_soft=self.H_soft, name=self.name)
        raise ValueError(f"keep must be 'G_f' or 'H_soft', got {keep!r}")

    def to_dict(self) -> dict:
        return {"E": self.E, "G_shear": self.G_shear, "k_shear": self.k_shear, "A": self.A,
                "J": self.J, "I11": self.I11, "I22": self.I22, "N_bar": self.N_bar,
                "H_soft": self.H_soft, "G_f": self.G_f, "name": self.name}

    @classmethod
    def from_dict(cls, data: dict) -> FiberSection:
        return cls(E=data["E"], G_shear=data["G_shear"], k_shear=data["k_shear"], A=data["A"],
                   J=data["J"], I11=data["I11"], I22=data["I22"], N_bar=data["N_bar"],
                   H_soft=data["H_soft"], G_f=data["G_f"], name=data.get("name", ""))


# Cellulose-like fiber: 2.5 mm long, square side sqrt(0.00028) mm.
FIBER_LENGTH = 2.5
FIBER_SIDE = math.sqrt(0.00028)
FIBER_DENSITY = 1500.0  # kg/m^3


def reference_fiber(G_f: float = 0.1) -> FiberSection:
    """Section of the benchmark fiber (E=6500, G=3250, k=0.84, N̄=0.2352)."""
    return FiberSection.square(FIBER_SIDE, E=6500.0, G_shear=3250.0, k_shear=0.84,
                               N_bar=0.2352, G_f=G_f, name="fiber")


class GeneralizedStrain(NamedTuple):
    eps: float
    gamma_y: float
    gamma_z: float
    kappa_x: float
    kappa_y: float
    kappa_z: float


class StressResultant(NamedTuple):
    N: float
    Qy: float
    Qz: float
    Mx: float
    My: float
    Mz: float


def bulk_tangent(section: FiberSection) -> np.ndarray:
    """Diagonal 6x6 section tangent diag(EA, kGA, kGA, GJ, G I11, G I22)."""
    s = section
    kGA = s.k_shear * s.G_shear * s.A
    return np.diag([s.E * s.A, kGA, kGA, s.G_shear * s.J, s.G_shear * s.I11, s.G_shear * s.I22])


def _check_length(l_e: float) -> float:
    l_e = float(l_e)
    if not (math.isfinite(l_e) and l_e > 0):
        raise InvalidGeometryError(f"element length must be positive, got {l_e!r}")
    return l_e


def b_matrix(l_e: float) -> np.ndarray:
    """6x12 strain-displacement matrix at x = l_e/2 (N1 = N2 = 1/2)."""
    l_e = _check_length(l_e)
    b1, b2 = -1.0 / l_e, 1.0 / l_e
    n1 = n2 = 0.5
    B = np.zeros((6, 12))
    for i in range(6):
        B[i, i] = b1
        B[i, 6 + i] = b2
    # shear rows pick up the rotations
    B[1, 5], B[1, 11] = -n1, -n2
    B[2, 4], B[2, 10] = n1, n2
    return B


def strain_from_displacements(d_local, l_e: float) -> GeneralizedStrain:
    """Bulk generalized strain B·d (no jump contribution)."""
    d = np.asarray(d_local, dtype=float)
    if d.shape != (NDOF_ELEM,):
        raise ValueError(f"d_local must have shape (12,), got {d.shape}")
    return GeneralizedStrain(*(b_matrix(l_e) @ d))


def stress_resultants(strain, xi: float, l_e: float, section: FiberSection) -> StressResultant:
    """Resultants from C on the bulk strain; only the axial jump enters.

    N = EA (ε - ξ/l_e); the remaining components use the unenhanced strains.
    """
    l_e = _check_length(l_e)
    sig = bulk_tangent(section) @ np.asarray(strain, dtype=float)
    sig[0] = section.EA * (strain[0] - xi / l_e)
    return StressResultant(*sig)


def internal_force(sigma, l_e: float) -> np.ndarray:
    """Nodal force vector l_e·Bᵀσ."""
    return l_e * b_matrix(l_e).T @ np.asarray(sigma, dtype=float)


def bulk_stiffness(section: FiberSection, l_e: float) -> np.ndarray:
    """12x12 elastic stiffness l_e·BᵀCB."""
    B = b_matrix(l_e)
    return l_e * B.T @ bulk_tangent(section) @ B


def rigid_body_modes(l_e: float) -> np.ndarray:
    """Six rigid modes (columns) of an element lying on the local x axis.

    Rotations are taken about the element center.
    """
    l_e = _check_length(l_e)
    modes = np.zeros((12, 6))
    xs = (-l_e / 2.0, l_e / 2.0)
    for a, x in enumerate(xs):
        o = 6 * a
        for i in range(3):
            modes[o + i, i] = 1.0
            modes[o + 3 + i, 3 + i] = 1.0
        # u = θ × r with r = (x, 0, 0)
        modes[o + 1, 5] = x   # θz -> uy
        modes[o + 2, 4] = -x  # θy -> uz
    return modes
