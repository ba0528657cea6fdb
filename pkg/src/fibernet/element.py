"""Element tangent stiffness for the monolithic, staggered and hybrid schemes.

The jump ξ is condensed out of the enhanced element equations

    [K_dd  K_dξ] [Δd]   [f_int - f_ext]
    [K_ξd  K_ξξ] [Δξ] = [      0      ]

giving K_mono = K_dd - K_dξ K_ξξ⁻¹ K_ξd. The staggered tangent keeps only
K_dd. The hybrid tangent is the convex mix β K_mono + (1-β) K_stagg, with β
picked per element so that the axial stiffness never drops below
K_min = h_tol·EA/l_e.

Everything here works on one element at a time and is used as the reference
implementation; :mod:`fibernet.assembly` has the batched equivalent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import hinge as hinge_mod
from .beam import (AXIAL_DOFS, FiberSection, b_matrix, bulk_tangent, internal_force,
                   stress_resultants, strain_from_displacements)
from .errors import InvalidGeometryError, SingularCondensationError

SCHEMES = ("monolithic", "staggered", "hybrid")


@dataclass(frozen=True)
class ElementGeometry:
    node_ids: tuple[int, int]
    l_e: float
    Lambda: np.ndarray

    def __post_init__(self):
        if not (np.isfinite(self.l_e) and self.l_e > 0):
            raise InvalidGeometryError(f"element length must be positive, got {self.l_e!r}")
        lam = np.asarray(self.Lambda, dtype=float)
        if lam.shape != (3, 3):
            raise InvalidGeometryError(f"Lambda must be 3x3, got {lam.shape}")
        if not np.allclose(lam @ lam.T, np.eye(3), rtol=0.0, atol=1e-12):
            raise InvalidGeometryError("Lambda is not orthonormal")
        if np.linalg.det(lam) < 0:
            raise InvalidGeometryError("Lambda is not a proper rotation (det < 0)")
        object.__setattr__(self, "Lambda", lam)

    @classmethod
    def from_coords(cls, x1, x2, node_ids=(0, 1)) -> ElementGeometry:
        axis = np.asarray(x2, dtype=float) - np.asarray(x1, dtype=float)
        length = float(np.linalg.norm(axis))
        if not length > 0:
            raise InvalidGeometryError("coincident element nodes")
        return cls(tuple(node_ids), length, local_triad(axis))


def local_triad(axis) -> np.ndarray:
    """Rows are the local axes (e_x, e_y, e_z) in global coordinates.

    e_y = z × e_x, falling back to x × e_x when the element is parallel to z.
    """
    a = np.asarray(axis, dtype=float)
    e_x = a / np.linalg.norm(a)
    e_y = np.cross([0.0, 0.0, 1.0], e_x)
    if np.linalg.norm(e_y) < 1e-8:
        e_y = np.cross([1.0, 0.0, 0.0], e_x)
    e_y /= np.linalg.norm(e_y)
    e_z = np.cross(e_x, e_y)
    return np.vstack([e_x, e_y, e_z])


def transformation(Lambda) -> np.ndarray:
    """12x12 block-diagonal T with d_local = T d_global."""
    T = np.zeros((12, 12))
    for i in range(4):
        T[3 * i:3 * i + 3, 3 * i:3 * i + 3] = Lambda
    return T


@dataclass(frozen=True)
class SchemeConfig:
    scheme: str = "hybrid"
    h_tol: float = 0.01

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        # h_tol also sets the rupture floor K_min, so it is checked for every scheme
        if not 0.0 < self.h_tol < 1.0:
            raise ValueError(f"h_tol must lie in (0, 1), got {self.h_tol!r}")

    @property
    def label(self) -> str:
        return f"hybrid({self.h_tol:g})" if self.scheme == "hybrid" else self.scheme

    @classmethod
    def parse(cls, text: str, h_tol: float = 0.01) -> SchemeConfig:
        """Accepts 'staggered', 'monolithic', 'hybrid' or 'hybrid:<h_tol>'."""
        name, _, tol = text.strip().partition(":")
        if tol:
            if name != "hybrid":
                raise ValueError(f"only the hybrid scheme takes a tolerance: {text!r}")
            return cls(name, float(tol))
        return cls(name, h_tol)


@dataclass(frozen=True)
class SubMatrices:
    K_dd: np.ndarray
    K_dxi: np.ndarray
    K_xid: np.ndarray
    K_xixi: np.ndarray
    hinge_active: bool


@dataclass(frozen=True)
class ElementTangent:
    K: np.ndarray
    beta_used: float
    k_min_active: bool


def submatrices(section: FiberSection, geom: ElementGeometry, hinge_active: bool) -> SubMatrices:
    """Enhanced-element blocks at the single Gauss point.

    The softening modulus sits only in the axial slot of the hinge tangent,
    and C* drops the axial entry of C (tension-only failure). With
    G = -I/l_e the C*·B term cancels the non-axial rows of K_ξd exactly.
    """
    l_e = geom.l_e
    B = b_matrix(l_e)
    C = bulk_tangent(section)
    Gm = -np.eye(6) / l_e
    C_star = C.copy()
    C_star[0, 0] = 0.0
    H = np.zeros((6, 6))
    if hinge_active:
        H[0, 0] = section.H_soft
    K_dd = l_e * B.T @ C @ B
    K_dxi = l_e * B.T @ C @ Gm
    K_xid = l_e * Gm @ C @ B + C_star @ B
    K_xixi = l_e * Gm.T @ C @ Gm + H
    return SubMatrices(K_dd, K_dxi, K_xid, K_xixi, bool(hinge_active))


def condense_monolithic(subs: SubMatrices, full: bool = False) -> np.ndarray:
    """Static condensation of the jump.

    By default only the axial jump block is condensed, the other jump
    components being frozen at zero. ``full=True`` condenses the whole 6x6
    block; both give the same matrix for this element.
    """
    if not subs.hinge_active:
        return subs.K_dd.copy()
    scale = max(abs(subs.K_dd[0, 0]), np.finfo(float).tiny)
    if full:
        pivots = np.linalg.eigvals(subs.K_xixi)
        if np.min(np.abs(pivots)) < 1e-14 * scale:
            raise SingularCondensationError("K_xixi is numerically singular")
        return subs.K_dd - subs.K_dxi @ np.linalg.solve(subs.K_xixi, subs.K_xid)
    pivot = subs.K_xixi[0, 0]
    if abs(pivot) < 1e-14 * scale:
        raise SingularCondensationError(f"axial jump pivot {pivot:.3g} is numerically zero")
    return subs.K_dd - np.outer(subs.K_dxi[:, 0], subs.K_xid[0, :]) / pivot


def staggered_stiffness(subs: SubMatrices) -> np.ndarray:
    return subs.K_dd.copy()


def hybrid_beta(k_mono_11: float, k_stagg_11: float, K_min: float) -> float:
    """Mixing factor that floors the axial stiffness at ``K_min``.

    The mixed axial stiffness β·k_mono + (1-β)·k_stagg equals
    max(k_mono, K_min).
    """
    assert K_min > 0 and k_stagg_11 > K_min, "require 0 < K_min < k_stagg_11"
    if k_mono_11 > K_min:
        return 1.0
    return (K_min - k_stagg_11) / (k_mono_11 - k_stagg_11)


def k_min(section: FiberSection, geom: ElementGeometry, h_tol: float) -> float:
    return h_tol * section.EA / geom.l_e


def hybrid_stiffness(subs: SubMatrices, scheme: SchemeConfig, section: FiberSection,
                     geom: ElementGeometry) -> ElementTangent:
    """Element tangent for any scheme: β=1 monolithic, β=0 staggered."""
    K_stagg = staggered_stiffness(subs)
    if scheme.scheme == "staggered":
        return ElementTangent(K_stagg, 0.0, False)
    K_mono = condense_monolithic(subs)
    if scheme.scheme == "monolithic":
        return ElementTangent(K_mono, 1.0, False)
    kmin = k_min(section, geom, scheme.h_tol)
    beta = hybrid_beta(K_mono[0, 0], K_stagg[0, 0], kmin)
    if beta == 1.0:
        return ElementTangent(K_mono, 1.0, False)
    return ElementTangent(beta * K_mono + (1.0 - beta) * K_stagg, beta, True)


def apply_rupture(K: np.ndarray, f_int: np.ndarray, K_min: float,
                  ruptured: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Delete the axial DOFs of a ruptured element, keeping K_min on the diagonal."""
    if not ruptured:
        return K, f_int
    K = K.copy()
    f_int = f_int.copy()
    for j in AXIAL_DOFS:
        K[j, :] = 0.0
        K[:, j] = 0.0
        f_int[j] = 0.0
    for j in AXIAL_DOFS:
        K[j, j] = K_min
    return K, f_int


def to_global(K_local: np.ndarray, f_local: np.ndarray,
              geom: ElementGeometry) -> tuple[np.ndarray, np.ndarray]:
    T = transformation(geom.Lambda)
    return T.T @ K_local @ T, T.T @ f_local


@dataclass(frozen=True)
class ElementResponse:
    K: np.ndarray
    f_int: np.ndarray
    update: hinge_mod.HingeUpdate
    beta: float
    k_min_active: bool


def element_response(section: FiberSection, geom: ElementGeometry, d_global,
                     state_n: hinge_mod.HingeState, scheme: SchemeConfig,
                     tangent_from_history: bool = False) -> ElementResponse:
    """One pass of the per-element pipeline at the current displacement.

    Steps: rotate to local, bulk strains, hinge update (or skip if already
    ruptured), scheme tangent, rupture DOF deletion, internal force, rotate
    back. With ``tangent_from_history`` the softening tangent is used when
    the previous converged update was loading (first iteration of a step).
    """
    T = transformation(geom.Lambda)
    d_local = T @ np.asarray(d_global, dtype=float)
    strain = strain_from_displacements(d_local, geom.l_e)
    upd = hinge_mod.integrate(strain.eps, state_n, section, geom.l_e)
    sigma = list(stress_resultants(strain, upd.state.xi, geom.l_e, section))
    sigma[0] = upd.N
    f_local = internal_force(sigma, geom.l_e)

    if upd.state.ruptured:
        beta = float("nan")
        kmin_on = False
        K_local = staggered_stiffness(submatrices(section, geom, False))
        if upd.active:
            # the rupturing iteration still reports β before deletion
            subs = submatrices(section, geom, True)
            tan = hybrid_stiffness(subs, scheme, section, geom)
            beta = tan.beta_used
        K_local, f_local = apply_rupture(K_local, f_local, k_min(section, geom, scheme.h_tol))
    else:
        active = upd.active or (tangent_from_history and state_n.loading)
        tan = hybrid_stiffness(submatrices(section, geom, active), scheme, section, geom)
        K_local, beta, kmin_on = tan.K, tan.beta_used, tan.k_min_active
    K_g, f_g = to_global(K_local, f_local, geom)
    return ElementResponse(K_g, f_g, upd, beta, kmin_on)
