"""Batched element evaluation and sparse assembly over a whole network.

Every element tangent differs from its elastic bulk stiffness K_dd only in
the axial direction, so it is stored as

    K_e = K_dd + c · g gᵀ + k_r · (g1 g1ᵀ + g2 g2ᵀ)

with g = Tᵀ(e7 - e1) the global axial stretch vector, g1/g2 its two nodal
halves, c the scheme-dependent axial correction and k_r the K_min floor kept
on the deleted DOFs of a ruptured element. This matches
:func:`fibernet.element.element_response` entry by entry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .beam import NDOF_NODE, bulk_stiffness
from .element import SchemeConfig, local_triad, transformation
from .errors import InvalidGeometryError
from .hinge import dissipation_batch, integrate_batch
from .network import NetworkModel


@dataclass
class HingeStates:
    """Converged hinge history for every element (struct of arrays)."""

    xi: np.ndarray
    alpha: np.ndarray
    ruptured: np.ndarray
    loading: np.ndarray

    @classmethod
    def virgin(cls, n: int) -> HingeStates:
        return cls(np.zeros(n), np.zeros(n), np.zeros(n, dtype=bool), np.zeros(n, dtype=bool))

    def copy(self) -> HingeStates:
        return HingeStates(self.xi.copy(), self.alpha.copy(), self.ruptured.copy(), self.loading.copy())


@dataclass
class Evaluation:
    """Element quantities at one displacement iterate."""

    f_int: np.ndarray          # global internal force vector
    f_elem: np.ndarray         # (n, 12) element forces
    N: np.ndarray
    eps: np.ndarray
    states: HingeStates
    active: np.ndarray
    c: np.ndarray              # axial tangent correction
    k_r: np.ndarray            # rupture floor on the deleted DOFs
    beta: np.ndarray           # NaN where the hinge is not softening
    k_min_active: np.ndarray


class Assembler:
    """Precomputed element data and sparsity pattern of one model."""

    def __init__(self, model: NetworkModel, scheme: SchemeConfig):
        self.model = model
        self.scheme = scheme
        n = model.n_elements
        n1, n2 = model.elements[:, 0], model.elements[:, 1]
        axis = model.nodes[n2] - model.nodes[n1]
        self.l_e = np.linalg.norm(axis, axis=1)
        if n and not np.all(self.l_e > 0):
            bad = int(np.flatnonzero(~(self.l_e > 0))[0])
            raise InvalidGeometryError(f"element {bad} has zero length")
        self.n_dof = NDOF_NODE * model.n_nodes

        secs = model.sections
        sid = model.element_section
        self.EA = np.array([s.EA for s in secs])[sid] if n else np.zeros(0)
        self.N_bar = np.array([s.N_bar for s in secs])[sid] if n else np.zeros(0)
        self.H = np.array([s.H_soft for s in secs])[sid] if n else np.zeros(0)
        self.G_f = np.array([s.G_f for s in secs])[sid] if n else np.zeros(0)
        self.k_el = self.EA / self.l_e
        self.K_min = scheme.h_tol * self.k_el
        with np.errstate(divide="ignore"):
            self.k_mono = self.k_el * self.H / (self.k_el + self.H)

        self.e_x = axis / self.l_e[:, None] if n else np.zeros((0, 3))
        self.K_dd = np.empty((n, 12, 12))
        cache = {}
        for e in range(n):
            lam = local_triad(axis[e])
            T = transformation(lam)
            key = (int(sid[e]), float(self.l_e[e]))
            if key not in cache:
                cache[key] = bulk_stiffness(secs[sid[e]], self.l_e[e])
            self.K_dd[e] = T.T @ cache[key] @ T
        self.g1 = np.zeros((n, 12))
        self.g1[:, 0:3] = self.e_x
        self.g2 = np.zeros((n, 12))
        self.g2[:, 6:9] = self.e_x
        self.g = self.g2 - self.g1

        base = np.arange(NDOF_NODE)
        self.dofs = np.concatenate([n1[:, None] * NDOF_NODE + base, n2[:, None] * NDOF_NODE + base], axis=1)

        self.fixed_dofs, self.moving_dofs = self._constrained_dofs()
        presc = np.zeros(self.n_dof, dtype=bool)
        presc[self.fixed_dofs] = True
        presc[self.moving_dofs] = True
        self.prescribed = np.flatnonzero(presc)
        self.free = np.flatnonzero(~presc)
        self.reaction_dofs = model.moving * NDOF_NODE
        self._pattern()

    def _constrained_dofs(self):
        m = self.model
        fixed = set()
        for node in m.fixed:
            fixed.update(range(NDOF_NODE * node, NDOF_NODE * node + 6))
        for node in m.moving:
            fixed.update((NDOF_NODE * node + 1, NDOF_NODE * node + 5))
        for node in m.plane_constrained:
            fixed.update((NDOF_NODE * node + 2, NDOF_NODE * node + 3, NDOF_NODE * node + 4))
        moving = np.array(sorted(NDOF_NODE * int(node) for node in m.moving), dtype=np.int64)
        if len(set(moving.tolist()) & fixed):
            raise InvalidGeometryError("a node belongs to both grips")
        fixed_arr = np.array(sorted(fixed), dtype=np.int64)
        return fixed_arr, moving

    def _pattern(self):
        """Free-free CSR pattern and the map from element entries to it."""
        free_index = np.full(self.n_dof, -1, dtype=np.int64)
        free_index[self.free] = np.arange(len(self.free))
        loc = free_index[self.dofs]                           # (n, 12)
        rows = np.repeat(loc, 12, axis=1).reshape(-1)
        cols = np.tile(loc, (1, 12)).reshape(-1)
        keep = (rows >= 0) & (cols >= 0)
        nf = len(self.free)
        key = rows[keep] * nf + cols[keep]
        uniq, inv = np.unique(key, return_inverse=True)
        self._entry_keep = keep
        self._entry_slot = inv
        self._nnz = len(uniq)
        r, c = uniq // max(nf, 1), uniq % max(nf, 1)
        self._indices = c.astype(np.int32)
        self._indptr = np.concatenate([[0], np.cumsum(np.bincount(r, minlength=nf))]).astype(np.int32)
        self.n_free = nf

    # -- element evaluation ----------------------------------------------------

    def gather(self, d: np.ndarray) -> np.ndarray:
        return d[self.dofs]

    def evaluate(self, d: np.ndarray, states_n: HingeStates, tangent_from_history: bool = False) -> Evaluation:
        """Hinge update and tangent coefficients at displacement ``d``."""
        de = self.gather(d)
        eps = np.einsum("ij,ij->i", self.g, de) / self.l_e
        N, xi, alpha, rupt, active = integrate_batch(
            eps, states_n.xi, states_n.alpha, states_n.ruptured, self.EA, self.l_e, self.N_bar, self.H)
        new_states = HingeStates(xi, alpha, rupt, active & ~states_n.ruptured)

        f_elem = np.einsum("eij,ej->ei", self.K_dd, de) + ((N - self.EA * eps))[:, None] * self.g
        f_int = np.bincount(self.dofs.ravel(), weights=f_elem.ravel(), minlength=self.n_dof)

        softening = active | (tangent_from_history & states_n.loading & ~states_n.ruptured)
        c, beta, kmin_on = self._axial_correction(softening)
        beta = np.where(softening, beta, np.nan)
        k_r = np.where(rupt, self.K_min, 0.0)
        c = np.where(rupt, -self.k_el, c)
        beta = np.where(rupt & ~active, np.nan, beta)
        kmin_on = kmin_on & ~rupt
        return Evaluation(f_int, f_elem, N, eps, new_states, active, c, k_r, beta, kmin_on)

    def _axial_correction(self, softening: np.ndarray):
        n = len(softening)
        s = self.scheme.scheme
        if s == "staggered":
            return np.zeros(n), np.zeros(n), np.zeros(n, dtype=bool)
        k_mono = self.k_mono
        if s == "monolithic":
            with np.errstate(invalid="ignore"):
                return np.where(softening, k_mono - self.k_el, 0.0), np.ones(n), np.zeros(n, dtype=bool)
        floor = ~(k_mono > self.K_min)
        # k_mono is infinite for elements at the snap-back length; they never soften
        with np.errstate(divide="ignore", invalid="ignore"):
            beta = np.where(floor, (self.K_min - self.k_el) / (k_mono - self.k_el), 1.0)
            c = np.where(softening, beta * (k_mono - self.k_el), 0.0)
        return c, beta, softening & floor

    def element_matrices(self, ev: Evaluation) -> np.ndarray:
        K = self.K_dd + ev.c[:, None, None] * np.einsum("ei,ej->eij", self.g, self.g)
        if ev.k_r.any():
            K = K + ev.k_r[:, None, None] * (np.einsum("ei,ej->eij", self.g1, self.g1)
                                             + np.einsum("ei,ej->eij", self.g2, self.g2))
        return K

    def stiffness_free(self, ev: Evaluation) -> sparse.csr_matrix:
        """Free-free block of the global tangent, CSR with a fixed pattern."""
        K = self.element_matrices(ev).reshape(-1)
        data = np.bincount(self._entry_slot, weights=K[self._entry_keep], minlength=self._nnz)
        return sparse.csr_matrix((data, self._indices, self._indptr), shape=(self.n_free, self.n_free))

    def stiffness_full(self, ev: Evaluation) -> sparse.csr_matrix:
        """Global 6·n_nodes tangent (used by tests and diagnostics)."""
        K = self.element_matrices(ev)
        rows = np.repeat(self.dofs, 12, axis=1).reshape(-1)
        cols = np.tile(self.dofs, (1, 12)).reshape(-1)
        return sparse.coo_matrix((K.reshape(-1), (rows, cols)), shape=(self.n_dof, self.n_dof)).tocsr()

    def tangent_times(self, ev: Evaluation, v: np.ndarray) -> np.ndarray:
        """K·v without forming the global matrix."""
        ve = self.gather(v)
        fe = np.einsum("eij,ej->ei", self.K_dd, ve)
        fe += (ev.c * np.einsum("ei,ei->e", self.g, ve))[:, None] * self.g
        if ev.k_r.any():
            fe += (ev.k_r * np.einsum("ei,ei->e", self.g1, ve))[:, None] * self.g1
            fe += (ev.k_r * np.einsum("ei,ei->e", self.g2, ve))[:, None] * self.g2
        return np.bincount(self.dofs.ravel(), weights=fe.ravel(), minlength=self.n_dof)

    # -- post-processing ---------------------------------------------------------

    def reaction(self, f_int: np.ndarray) -> float:
        return float(f_int[self.reaction_dofs].sum())

    def elastic_energy(self, d: np.ndarray, ev: Evaluation) -> float:
        """½ Σ l_e σᵀC⁻¹σ with the axial resultant taken from the hinge."""
        de = self.gather(d)
        bulk = np.einsum("ei,eij,ej->e", de, self.K_dd, de)
        axial_fix = self.l_e * (ev.N ** 2 / self.EA - self.EA * ev.eps ** 2)
        return float(0.5 * (bulk + axial_fix).sum())

    def dissipation(self, states: HingeStates) -> float:
        return float(dissipation_batch(states.alpha, states.ruptured, self.N_bar, self.H, self.G_f).sum())
