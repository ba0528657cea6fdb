"""Displacement-controlled incremental Newton solver.

Each step ramps the moving-grip u_x by delta_0 / n_steps. Within a step the
hinge states are always recomputed from the last converged history at the
current iterate, so the three schemes share the residual and differ only in
the assembled tangent. Prescribed DOFs are removed by partitioning.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from .assembly import Assembler, Evaluation, HingeStates
from .element import SchemeConfig
from .errors import ElementError, FibernetError, SingularMatrixError
from .network import NetworkModel

MAX_BISECTIONS = 8


@dataclass(frozen=True)
class SolveConfig:
    scheme: SchemeConfig = field(default_factory=SchemeConfig)
    n_steps: int = 100
    delta_0: float = 1.0
    max_iters: int = 500
    tol_rel: float = 1e-6
    tol_abs: float | None = None
    bisect: bool = False
    checkpoints: tuple[int, ...] = ()

    def __post_init__(self):
        if isinstance(self.scheme, str):
            object.__setattr__(self, "scheme", SchemeConfig.parse(self.scheme))
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be an integer >= 1, got {self.n_steps!r}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError(f"max_iters must be an integer >= 1, got {self.max_iters!r}")
        if not self.tol_rel > 0:
            raise ValueError("tol_rel must be positive")
        if self.tol_abs is not None and not self.tol_abs > 0:
            raise ValueError("tol_abs must be positive")
        if not math.isfinite(self.delta_0):
            raise ValueError("delta_0 must be finite")
        object.__setattr__(self, "checkpoints", tuple(sorted(set(int(c) for c in self.checkpoints))))

    def resolved_tol_abs(self, model: NetworkModel) -> float:
        """Default floor 1e-9 · max N̄ · sqrt(element count)."""
        if self.tol_abs is not None:
            return self.tol_abs
        n_bar = max(s.N_bar for s in model.sections)
        return 1e-9 * n_bar * math.sqrt(max(model.n_elements, 1))

    def to_dict(self) -> dict:
        return {"scheme": self.scheme.scheme, "h_tol": self.scheme.h_tol, "n_steps": self.n_steps,
                "delta_0": self.delta_0, "max_iters": self.max_iters, "tol_rel": self.tol_rel,
                "tol_abs": self.tol_abs, "bisect": self.bisect, "checkpoints": list(self.checkpoints)}


@dataclass(frozen=True)
class StepRecord:
    step: int
    u: float
    reaction: float
    stress: float
    iterations: int
    n_ruptured: int
    min_beta: float
    mean_beta: float
    n_floored: int
    external_work: float
    elastic_energy: float
    dissipation: float


@dataclass(frozen=True)
class StateDump:
    step: int
    xi: np.ndarray
    alpha: np.ndarray
    ruptured: np.ndarray


@dataclass
class SolveReport:
    scheme: str
    records: list[StepRecord]
    cumulative_iterations: int
    termination: str
    failed_step: int | None = None
    failure_reason: str = ""
    nonpositive_pivots: int = 0
    wall_time: float = 0.0
    dumps: list[StateDump] = field(default_factory=list)
    final_d: np.ndarray | None = None
    final_states: HingeStates | None = None

    @property
    def converged(self) -> bool:
        return self.termination == "converged"

    def curve(self) -> tuple[np.ndarray, np.ndarray]:
        """(u, reaction) including the unloaded start point."""
        u = np.array([0.0] + [r.u for r in self.records])
        f = np.array([0.0] + [r.reaction for r in self.records])
        return u, f

    def summary(self) -> dict:
        rec = self.records
        return {
            "scheme": self.scheme,
            "termination": self.termination,
            "failed_step": self.failed_step,
            "failure_reason": self.failure_reason,
            "steps_completed": len(rec),
            "cumulative_iterations": self.cumulative_iterations,
            "peak_reaction": max((r.reaction for r in rec), default=0.0),
            "final_u": rec[-1].u if rec else 0.0,
            "n_ruptured": rec[-1].n_ruptured if rec else 0,
            "nonpositive_pivots": self.nonpositive_pivots,
            "external_work": rec[-1].external_work if rec else 0.0,
            "elastic_energy": rec[-1].elastic_energy if rec else 0.0,
            "dissipation": rec[-1].dissipation if rec else 0.0,
            "max_alpha": float(self.final_states.alpha.max()) if self.final_states is not None
            and len(self.final_states.alpha) else 0.0,
        }


class StepFailed(FibernetError):
    code = "step_failed"

    def __init__(self, message: str, iterations: int):
        super().__init__(message)
        self.iterations = iterations


# -- linear algebra -------------------------------------------------------------


@dataclass
class Factorization:
    lu: object
    pivots: np.ndarray
    perm_c: np.ndarray

    @property
    def nonpositive_pivots(self) -> int:
        return int(np.count_nonzero(self.pivots <= 0.0))

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.lu is None:
            return np.zeros(0)
        return self.lu.solve(rhs)


def factorize(K, dof_ids=None) -> Factorization:
    """Sparse LU with a symmetric ordering and diagonal pivots preferred.

    Diagonal pivoting keeps U's diagonal meaningful as the pivot sequence of
    an LDLᵀ, which is what the hybrid positivity check counts. Indefinite
    matrices are fine.

    Raises:
        SingularMatrixError: zero or numerically negligible pivot; ``dof`` is
            the matrix row (mapped through ``dof_ids`` when given).
    """
    K = sparse.csc_matrix(K, dtype=float)
    n = K.shape[0]
    ids = np.arange(n) if dof_ids is None else np.asarray(dof_ids)
    if n == 0:
        return Factorization(None, np.zeros(0), np.zeros(0, dtype=int))
    scale = abs(K).max()
    if not np.isfinite(scale):
        raise SingularMatrixError("matrix has non-finite entries", -1)
    try:
        lu = spla.splu(K, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                       options={"SymmetricMode": True})
    except RuntimeError as exc:
        empty = np.flatnonzero(abs(K).max(axis=1).toarray().ravel() == 0.0)
        dof = int(ids[empty[0]]) if len(empty) else -1
        raise SingularMatrixError(f"factorization failed: {exc} (DOF {dof})", dof) from exc
    pivots = lu.U.diagonal()
    inv_perm = np.empty(n, dtype=np.int64)
    inv_perm[lu.perm_c] = np.arange(n)
    small = np.abs(pivots) <= 1e-13 * scale
    if small.any():
        k = int(np.flatnonzero(small)[0])
        dof = int(ids[inv_perm[k]])
        raise SingularMatrixError(f"pivot {pivots[k]:.3g} at DOF {dof} is numerically zero", dof)
    return Factorization(lu, pivots, lu.perm_c)


def linear_solve(K, rhs, dof_ids=None) -> np.ndarray:
    """Direct sparse solve of K x = rhs (K symmetric, possibly indefinite)."""
    rhs = np.asarray(rhs, dtype=float)
    fac = factorize(K, dof_ids)
    x = fac.solve(rhs)
    K = sparse.csr_matrix(K)
    res = np.linalg.norm(K @ x - rhs)
    if res > 1e-10 * max(np.linalg.norm(rhs), np.finfo(float).tiny):
        # poorly conditioned for diagonal pivoting: redo with partial pivoting
        x = spla.splu(sparse.csc_matrix(K)).solve(rhs)
    return x


# -- Newton step --------------------------------------------------------------------


@dataclass
class _StepResult:
    d: np.ndarray
    states: HingeStates
    ev: Evaluation
    iterations: int


class Solver:
    """Stateful driver for one model and configuration."""

    def __init__(self, model: NetworkModel, config: SolveConfig):
        self.model = model
        self.config = config
        self.asm = Assembler(model, config.scheme)
        self.tol_abs = config.resolved_tol_abs(model)
        self._fac: Factorization | None = None
        self._fac_data: np.ndarray | None = None
        self.nonpositive_pivots = 0
        self.n_factorizations = 0

    def _solve_free(self, ev: Evaluation, rhs: np.ndarray) -> np.ndarray:
        K = self.asm.stiffness_free(ev)
        if self._fac_data is None or not np.array_equal(K.data, self._fac_data):
            self._fac = factorize(K, self.asm.free)
            self._fac_data = K.data.copy()
            self.n_factorizations += 1
            if self.config.scheme.scheme == "hybrid":
                self.nonpositive_pivots = max(self.nonpositive_pivots, self._fac.nonpositive_pivots)
        x = self._fac.solve(rhs)
        if not np.all(np.isfinite(x)):
            raise SingularMatrixError("linear solve produced non-finite values", -1)
        return x

    def evaluate(self, d, states_n, tangent_from_history=False) -> Evaluation:
        return self.asm.evaluate(d, states_n, tangent_from_history)

    def solve_step(self, d_prev: np.ndarray, states_n: HingeStates, u_target: float) -> _StepResult:
        """Newton iteration to equilibrium at grip displacement ``u_target``.

        Raises StepFailed (states are left untouched) when the iteration
        cap is hit or the iterate blows up.
        """
        asm, cfg = self.asm, self.config
        free = asm.free
        dp = np.zeros(asm.n_dof)
        dp[asm.moving_dofs] = u_target - d_prev[asm.moving_dofs]

        ev0 = self.evaluate(d_prev, states_n, tangent_from_history=True)
        r0 = ev0.f_int[free]
        if not dp.any() and np.linalg.norm(r0) <= self.tol_abs:
            return _StepResult(d_prev.copy(), ev0.states, ev0, 0)

        d = d_prev + dp
        iterations = 0
        r_ref = None
        try:
            rhs = -(r0 + asm.tangent_times(ev0, dp)[free])
            d[free] += self._solve_free(ev0, rhs)
            iterations = 1
            while True:
                ev = self.evaluate(d, states_n)
                r = ev.f_int[free]
                rn = float(np.linalg.norm(r))
                if not math.isfinite(rn):
                    raise StepFailed("residual is not finite", iterations)
                if r_ref is None:
                    r_ref = rn
                if rn <= max(cfg.tol_rel * r_ref, self.tol_abs):
                    return _StepResult(d, ev.states, ev, iterations)
                if iterations >= cfg.max_iters:
                    raise StepFailed(f"no convergence in {cfg.max_iters} iterations "
                                     f"(|r|={rn:.3e}, ref={r_ref:.3e})", iterations)
                d[free] -= self._solve_free(ev, r)
                iterations += 1
        except SingularMatrixError as exc:
            raise StepFailed(f"singular tangent: {exc}", iterations) from exc
        except ElementError as exc:
            raise StepFailed(str(exc), iterations) from exc

    def _advance(self, d, states, u_from, u_to, depth):
        """solve_step with optional recursive halving; returns (result, iterations)."""
        try:
            res = self.solve_step(d, states, u_to)
            return res, res.iterations
        except StepFailed as exc:
            if not self.config.bisect or depth >= MAX_BISECTIONS:
                raise
            spent = exc.iterations
            mid = 0.5 * (u_from + u_to)
            try:
                r1, i1 = self._advance(d, states, u_from, mid, depth + 1)
                r2, i2 = self._advance(r1.d, r1.states, mid, u_to, depth + 1)
            except StepFailed as inner:
                inner.iterations += spent
                raise
            return r2, spent + i1 + i2

    def run(self) -> SolveReport:
        cfg, asm, model = self.config, self.asm, self.model
        t0 = time.perf_counter()
        d = np.zeros(asm.n_dof)
        states = HingeStates.virgin(model.n_elements)
        records: list[StepRecord] = []
        dumps: list[StateDump] = []
        cum = 0
        work = 0.0
        u_prev, f_prev = 0.0, 0.0
        termination, failed, reason = "converged", None, ""
        checkpoints = set(cfg.checkpoints)
        for step in range(1, cfg.n_steps + 1):
            u = cfg.delta_0 * step / cfg.n_steps
            try:
                res, its = self._advance(d, states, u_prev, u, 0)
            except StepFailed as exc:
                cum += exc.iterations
                termination, failed, reason = "step_failed", step, str(exc)
                break
            cum += its
            d, states, ev = res.d, res.states, res.ev
            reaction = asm.reaction(ev.f_int)
            work += 0.5 * (reaction + f_prev) * (u - u_prev)
            soft_beta = ev.beta[np.isfinite(ev.beta)]
            records.append(StepRecord(
                step=step, u=u, reaction=reaction, stress=reaction / model.stress_area,
                iterations=its, n_ruptured=int(states.ruptured.sum()),
                min_beta=float(soft_beta.min()) if len(soft_beta) else float("nan"),
                mean_beta=float(soft_beta.mean()) if len(soft_beta) else float("nan"),
                n_floored=int(ev.k_min_active.sum()),
                external_work=work, elastic_energy=asm.elastic_energy(d, ev),
                dissipation=asm.dissipation(states)))
            if step in checkpoints:
                dumps.append(StateDump(step, states.xi.copy(), states.alpha.copy(), states.ruptured.copy()))
            u_prev, f_prev = u, reaction
        return SolveReport(scheme=cfg.scheme.label, records=records, cumulative_iterations=cum,
                           termination=termination, failed_step=failed, failure_reason=reason,
                           nonpositive_pivots=self.nonpositive_pivots,
                           wall_time=time.perf_counter() - t0, dumps=dumps, final_d=d,
                           final_states=states)


def assemble(model: NetworkModel, states: HingeStates, d: np.ndarray, scheme: SchemeConfig):
    """Global tangent (6·n_nodes square), free-DOF residual vector and f_int.

    The residual is the internal force with prescribed rows zeroed; there are
    no external nodal loads.
    """
    asm = Assembler(model, scheme)
    ev = asm.evaluate(np.asarray(d, dtype=float), states)
    r = ev.f_int.copy()
    r[asm.prescribed] = 0.0
    return asm.stiffness_full(ev), r, ev.f_int


def solve_step(model: NetworkModel, states: HingeStates, d_prev: np.ndarray, u_target: float,
               config: SolveConfig):
    """One load step from a converged state; returns (d, states, iterations)."""
    res = Solver(model, config).solve_step(np.asarray(d_prev, dtype=float), states, u_target)
    return res.d, res.states, res.iterations


def run(model: NetworkModel, config: SolveConfig) -> SolveReport:
    return Solver(model, config).run()
