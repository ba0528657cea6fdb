"""Mid-span softening hinge: tension-only rupture with linear softening.

Only the axial jump ξ evolves. The failure surface in resultant space is
Φ = N - (N̄ + Hα) with H < 0; complete rupture happens at α_max = N̄/|H|,
after which the element carries no axial force.

The scalar functions are the reference path used by the element module and
the tests. :func:`integrate_batch` is the same algorithm over arrays of
elements and is what the global solver calls every Newton iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .beam import FiberSection
from .errors import ElementError, SnapBackError

THRESHOLD_REL = 1e-10
RUPTURE_RTOL = 1e-12
_MAX_PASSES = 20


@dataclass(frozen=True)
class HingeState:
    """Converged hinge history of one element.

    ``loading`` records whether the last update was on the failure surface;
    the solver uses it to pick the tangent for the first iteration of a step.
    """

    xi: float = 0.0
    alpha: float = 0.0
    ruptured: bool = False
    loading: bool = False


@dataclass(frozen=True)
class TrialState:
    N_trial: float
    Phi_trial: float


@dataclass(frozen=True)
class HingeUpdate:
    N: float
    state: HingeState
    active: bool


def alpha_max(section: FiberSection) -> float:
    """Jump at complete rupture, N̄/|H| (equivalently 2 G_f / N̄)."""
    return section.N_bar / abs(section.H_soft)


def threshold(section: FiberSection) -> float:
    return THRESHOLD_REL * section.N_bar


def trial_state(eps: float, state_n: HingeState, section: FiberSection, l_e: float) -> TrialState:
    """Elastic predictor with the jump frozen at its previous value."""
    N_trial = section.EA * (eps - state_n.xi / l_e)
    Phi_trial = N_trial - (section.N_bar + section.H_soft * state_n.alpha)
    return TrialState(N_trial, Phi_trial)


def return_map(trial: TrialState, state_n: HingeState, section: FiberSection,
               l_e: float) -> tuple[float, HingeState]:
    """Corrector for a trial state outside the failure surface.

    Returns the corrected axial force and the updated state. A trial inside
    the surface (Φ_trial <= 0) is passed through unchanged.

    Raises:
        SnapBackError: if H - EA·G·sign(N) <= 0, i.e. l_e >= EA/|H|.
    """
    if state_n.ruptured:
        raise ValueError("return_map called on a ruptured hinge")
    if trial.Phi_trial <= 0.0:
        return trial.N_trial, state_n

    EA, H = section.EA, section.H_soft
    G = -1.0 / l_e
    sign = 1.0 if trial.N_trial >= 0.0 else -1.0
    denom = H - EA * G * sign
    if not denom > 0.0:
        raise SnapBackError(
            f"nonpositive consistency denominator {denom:.6g}: l_e={l_e:.6g} >= EA/|H|={EA / abs(H):.6g}")

    tol = threshold(section)
    dgamma = 0.0
    phi = trial.Phi_trial
    N, alpha = trial.N_trial, state_n.alpha
    for _ in range(_MAX_PASSES):
        if phi <= tol:
            break
        dgamma += phi / denom
        N = trial.N_trial + EA * G * dgamma * sign
        alpha = state_n.alpha + dgamma
        phi = N - (section.N_bar + H * alpha)
    xi = state_n.xi + dgamma * sign

    if alpha >= alpha_max(section) * (1.0 - RUPTURE_RTOL):
        return 0.0, HingeState(xi=xi, alpha=alpha, ruptured=True, loading=True)
    return N, HingeState(xi=xi, alpha=alpha, ruptured=False, loading=True)


def integrate(eps: float, state_n: HingeState, section: FiberSection, l_e: float) -> HingeUpdate:
    """Full predictor-corrector for one element at axial strain ``eps``.

    A hinge that was already ruptured stays ruptured with N = 0; its jump
    then follows the total elongation so that the bulk stays unstrained.
    """
    if state_n.ruptured:
        xi = eps * l_e
        return HingeUpdate(0.0, HingeState(xi=xi, alpha=max(state_n.alpha, xi), ruptured=True), False)
    trial = trial_state(eps, state_n, section, l_e)
    if trial.Phi_trial <= threshold(section):
        return HingeUpdate(trial.N_trial, HingeState(state_n.xi, state_n.alpha, False, False), False)
    N, state = return_map(trial, state_n, section, l_e)
    return HingeUpdate(N, state, True)


def hinge_dissipation(state: HingeState, section: FiberSection) -> float:
    """Work dissipated by the hinge, ∫ t dξ = N̄α - |H|α²/2, capped at G_f."""
    a_max = alpha_max(section)
    if state.ruptured or state.alpha >= a_max:
        return section.G_f
    a = state.alpha
    return section.N_bar * a - 0.5 * abs(section.H_soft) * a * a


def integrate_batch(eps, xi_n, alpha_n, ruptured_n, EA, l_e, N_bar, H):
    """Vectorized :func:`integrate` over elements.

    All arguments are 1-D arrays of equal length. Returns a tuple
    ``(N, xi, alpha, ruptured, active)``.
    """
    eps = np.asarray(eps, dtype=float)
    N_trial = EA * (eps - xi_n / l_e)
    phi = N_trial - (N_bar + H * alpha_n)
    active = (phi > THRESHOLD_REL * N_bar) & ~ruptured_n

    # tension-only failure: an active trial always has N_trial > 0
    sign = np.where(N_trial >= 0.0, 1.0, -1.0)
    denom = H + EA / l_e * sign
    bad = active & ~(denom > 0.0)
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise ElementError(idx, SnapBackError(
            f"nonpositive consistency denominator: l_e={l_e[idx]:.6g} >= EA/|H|={EA[idx] / abs(H[idx]):.6g}"))
    dgamma = np.where(active, phi / np.where(active, denom, 1.0), 0.0)

    N = N_trial - EA / l_e * dgamma * sign
    xi = xi_n + dgamma * sign
    alpha = alpha_n + dgamma
    new_rupt = active & (alpha >= N_bar / np.abs(H) * (1.0 - RUPTURE_RTOL))
    N = np.where(new_rupt, 0.0, N)

    # previously ruptured: no axial force, jump absorbs the elongation
    xi_r = eps * l_e
    N = np.where(ruptured_n, 0.0, N)
    xi = np.where(ruptured_n, xi_r, xi)
    alpha = np.where(ruptured_n, np.maximum(alpha_n, xi_r), alpha)
    ruptured = ruptured_n | new_rupt
    return N, xi, alpha, ruptured, active


def dissipation_batch(alpha, ruptured, N_bar, H, G_f):
    a_max = N_bar / np.abs(H)
    open_ = N_bar * alpha - 0.5 * np.abs(H) * alpha * alpha
    return np.where(ruptured | (alpha >= a_max), G_f, open_)
