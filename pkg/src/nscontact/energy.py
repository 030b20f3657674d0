"""Per-step energy audit: works, algorithmic energies, exact identities.

Each scheme satisfies an exact algebraic identity linking the change of
a (possibly augmented) energy to its discrete works and a contact term.
Because the identities are exact in exact arithmetic, their numerical
residual on a correctly implemented step is pure roundoff; the audit
therefore doubles as the primary correctness oracle for the integrators.

For the theta-schemes the audited energy is the total mechanical energy
E = (1/2) v^T M v + (1/2) q^T K q.  The averaging family instead tracks
an algorithmic energy H that augments E with an acceleration term and,
for the schemes with nonzero averaging shift, a quadratic form of the
displacement-increment filter state.  The filter states evolve by a
midpoint rule whose time scale is nu*h with nu = 1/2 - alpha_m.

Sign conventions: external work enters positively, damping work is
nonpositive for positive semi-definite damping, and the contact term is
provably nonpositive for the averaging family (half weighting).  A
dissipation check therefore asserts dE (or dH) - W_ext - W_damping <= 0
whenever the scheme parameters satisfy the relevant conditions.

All functions are pure over immutable inputs and safe to call
concurrently across steps and runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, MissingHistory, NotApplicable
from .model import (
    LagrangianModel,
    SchemeSpec,
    SchemeVariant,
    StepRecord,
    SystemState,
)

DEFAULT_AUDIT_TOL = 1e-10

THETA_FAMILY = (SchemeVariant.MOREAU_JEAN, SchemeVariant.MOREAU_JEAN_VARIANT)


@dataclass(frozen=True)
class EnergyReport:
    """Audit result for one step (energies evaluated at the step end).

    ``condition_satisfied`` reports the per-contact parameter condition
    of the scheme's dissipation statement; ``condition_satisfied_max_e``
    evaluates the same bound through the worst restitution coefficient
    only.  Quantified over every contact the two are equivalent; both
    are reported for transparency.
    """

    E: float
    K_alg: float
    H_alg: float
    W_ext: float
    W_damping: float
    W_contact_step: float
    W_impact_style: float
    identity_residual: float
    residual_scale: float
    energy_gain: float
    dissipation_satisfied: bool
    condition_satisfied: bool
    condition_satisfied_max_e: bool


def total_energy(model: LagrangianModel, q, v) -> float:
    """Total mechanical energy (1/2) v^T M v + (1/2) q^T K q.

    Constant external forces (gravity included) are not folded into a
    potential, so E is not conserved in free flight; the audit tracks
    dE = W_ext instead.
    """
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    if q.shape != (model.n,) or v.shape != (model.n,):
        raise DimensionMismatch(f"q, v must have length {model.n}")
    return 0.5 * float(v @ model.mass @ v) + 0.5 * float(q @ model.stiffness @ q)


def _accel_term(model: LagrangianModel, a: np.ndarray, spec: SchemeSpec, h: float) -> float:
    return 0.25 * h**2 * (2.0 * spec.beta - spec.gamma) * float(a @ model.mass @ a)


def _filter_coeff(spec: SchemeSpec) -> float:
    # The z-term coefficient of H; zero whenever eta or nu vanishes (the
    # filter state is identically zero for nu = 0, so nothing is lost).
    nu, eta = spec.nu, spec.eta
    if eta == 0.0 or nu == 0.0:
        return 0.0
    return eta / (2.0 * nu**2) * (nu - (spec.gamma - 0.5))


def algorithmic_energy(model: LagrangianModel, state: SystemState,
                       spec: SchemeSpec, h: float) -> float:
    """Energy functional the averaging schemes provably dissipate.

    H = E + (h^2/4)(2 beta - gamma) a^T M a + c_z z^T K z, with the
    filter term dropped when the averaging shift vanishes (Newmark) and
    the acceleration term alone remaining in that case.

    Raises:
        NotApplicable: theta-schemes have no H; use total_energy.
    """
    if spec.variant in THETA_FAMILY:
        raise NotApplicable("theta-schemes track the total mechanical energy only")
    value = total_energy(model, state.q, state.v) + _accel_term(model, state.a, spec, h)
    cz = _filter_coeff(spec)
    if cz != 0.0:
        value += cz * float(state.z @ model.stiffness @ state.z)
    return value


def update_filters(model: LagrangianModel, state_prev: SystemState,
                   state_next: SystemState, h: float, spec: SchemeSpec):
    """Advance the three first-order filter states by one midpoint step.

    Each filter relaxes toward the increment of its driving signal
    (displacement, velocity, load) on the time scale nu*h:

        (1/2 + nu) s_next + (1/2 - nu) s_prev = nu * (signal increment)

    For nu = 1/2 this collapses to 2 s_next = increment, and for nu = 0
    a zero-started filter stays at zero.
    """
    if spec.variant in THETA_FAMILY:
        raise NotApplicable("filters exist only for the averaging schemes")
    nu = spec.nu
    denom = 0.5 + nu
    dq = state_next.q - state_prev.q
    dv = state_next.v - state_prev.v
    df = model.force(state_next.t) - model.force(state_prev.t)
    z = (nu * dq - (0.5 - nu) * state_prev.z) / denom
    x = (nu * dv - (0.5 - nu) * state_prev.x) / denom
    y = (nu * df - (0.5 - nu) * state_prev.y) / denom
    return z, x, y


def _gamma_mix(prev: np.ndarray, next_: np.ndarray, gamma: float) -> np.ndarray:
    return gamma * next_ + (1.0 - gamma) * prev


def discrete_works(model: LagrangianModel, record: StepRecord,
                   spec: SchemeSpec, h: float) -> tuple[float, float]:
    """Scheme-consistent external and damping works over one step.

    Theta scheme: h v_{k+theta}^T F_{k+theta} and the matching damping
    quadrature.  Averaging family: increment-weighted works with the
    gamma mix of endpoint values; the HHT variant additionally averages
    the current and previous mixes with weights (1-alpha, alpha), using
    the cached previous-step force and velocity (the virtual step before
    t0 replicates the initial data).

    Raises:
        MissingHistory: the multi-step form lacks its previous-step cache.
    """
    sp, sn = record.state_prev, record.state_next
    C = model.damping
    f_k = model.force(sp.t)
    f_k1 = model.force(sn.t)
    v = spec.variant
    if v is SchemeVariant.MOREAU_JEAN:
        th = spec.theta
        v_th = (1 - th) * sp.v + th * sn.v
        f_th = (1 - th) * f_k + th * f_k1
        return h * float(v_th @ f_th), -h * float(v_th @ C @ v_th)
    dq = sn.q - sp.q
    if v is SchemeVariant.MOREAU_JEAN_VARIANT:
        th = spec.theta
        v_th = (1 - th) * sp.v + th * sn.v
        f_th = (1 - th) * f_k + th * f_k1
        return float(dq @ f_th), -float(dq @ C @ v_th)
    gamma = spec.gamma
    f_mix = _gamma_mix(f_k, f_k1, gamma)
    v_mix = _gamma_mix(sp.v, sn.v, gamma)
    if v is SchemeVariant.NONSMOOTH_HHT:
        if sp.f_prev is None or sp.v_prev is None:
            raise MissingHistory("HHT works need the previous-step force/velocity cache")
        alpha = spec.alpha_f
        f_mix_prev = _gamma_mix(sp.f_prev, f_k, gamma)
        v_mix_prev = _gamma_mix(sp.v_prev, sp.v, gamma)
        w_ext = float(dq @ ((1 - alpha) * f_mix + alpha * f_mix_prev))
        w_damp = -float(dq @ C @ ((1 - alpha) * v_mix + alpha * v_mix_prev))
        return w_ext, w_damp
    return float(dq @ f_mix), -float(dq @ C @ v_mix)


def contact_work(U_prev, U_next, P, weight: float) -> float:
    """Work of the contact impulses against the weighted local velocity."""
    U_prev = np.asarray(U_prev, dtype=float)
    U_next = np.asarray(U_next, dtype=float)
    P = np.asarray(P, dtype=float)
    return float(((1.0 - weight) * U_prev + weight * U_next) @ P)


def _contact_weight(spec: SchemeSpec) -> float:
    return spec.theta if spec.variant is SchemeVariant.MOREAU_JEAN else 0.5


def _norm_sq(mat: np.ndarray, vec: np.ndarray) -> float:
    return float(vec @ mat @ vec)


def identity_residual(record: StepRecord, model: LagrangianModel,
                      spec: SchemeSpec, h: float) -> float:
    """Left minus right side of the scheme's exact per-step energy identity.

    Zero up to roundoff for a correct step; this is the primary
    correctness oracle of the package.
    """
    sp, sn = record.state_prev, record.state_next
    M, K, C = model.mass, model.stiffness, model.damping
    w_ext, w_damp = discrete_works(model, record, spec, h)
    dq = sn.q - sp.q
    u_half = contact_work(record.U_prev, record.U_next, record.P, 0.5)
    v = spec.variant

    if v in THETA_FAMILY:
        dE = (total_energy(model, sn.q, sn.v) - total_energy(model, sp.q, sp.v))
        if v is SchemeVariant.MOREAU_JEAN:
            th = spec.theta
            dv = sn.v - sp.v
            quad = (0.5 - th) * (_norm_sq(M, dv) + _norm_sq(K, dq))
            u_th = contact_work(record.U_prev, record.U_next, record.P, th)
            return dE - w_ext - w_damp - quad - u_th
        th = spec.theta
        return dE - w_ext - w_damp - (0.5 - th) * _norm_sq(K, dq) - u_half

    gamma, beta = spec.gamma, spec.beta
    da = sn.a - sp.a
    dz = sn.z - sp.z
    dH = (algorithmic_energy(model, sn, spec, h)
          - algorithmic_energy(model, sp, spec, h))
    accel_sq = 0.5 * h**2 * (gamma - 0.5) * (2 * beta - gamma) * _norm_sq(M, da)

    if v is SchemeVariant.NONSMOOTH_NEWMARK:
        rhs = (0.5 - gamma) * (_norm_sq(K, dq)
                               + 0.5 * h**2 * (2 * beta - gamma) * _norm_sq(M, da))
        return dH - w_ext - w_damp - rhs - u_half
    if v is SchemeVariant.NONSMOOTH_HHT:
        alpha = spec.alpha_f
        rhs = (u_half - accel_sq - (gamma - 0.5 - alpha) * _norm_sq(K, dq)
               - 2 * alpha * (1 - gamma) * _norm_sq(K, dz))
        return dH - w_ext - w_damp - rhs
    if v is SchemeVariant.NONSMOOTH_KH_GENERALIZED_ALPHA:
        eta, nu = spec.eta, spec.nu
        rhs = (u_half - accel_sq - (gamma - 0.5 - eta) * _norm_sq(K, dq)
               - spec.eta_over_nu * (nu - gamma + 0.5) * _norm_sq(K, dz))
        return dH - w_ext - w_damp - rhs

    # full averaging scheme: the load/velocity filters appear on the left
    eta, nu = spec.eta, spec.nu
    y_mix = _gamma_mix(sp.y, sn.y, gamma)
    x_mix = _gamma_mix(sp.x, sn.x, gamma)
    lhs = dH - w_ext - w_damp + spec.eta_over_nu * float(dq @ (y_mix - C @ x_mix))
    rhs = (u_half - accel_sq + (eta + 0.5 - gamma) * _norm_sq(K, dq)
           + spec.eta_over_nu * (gamma - nu - 0.5) * _norm_sq(K, dz))
    return lhs - rhs


def theta_upper_bound(restitution) -> float:
    """Largest theta for which the theta-scheme provably dissipates."""
    e = np.asarray(restitution, dtype=float)
    return float(1.0 / (1.0 + e.max(initial=0.0)))


def dissipation_check(record: StepRecord, model: LagrangianModel, spec: SchemeSpec,
                      h: float, tol: float = DEFAULT_AUDIT_TOL) -> tuple[bool, bool]:
    """Evaluate the scheme's dissipation statement on one step.

    Returns ``(condition_satisfied, dissipation_satisfied)``: whether
    the scheme parameters meet the hypothesis of the statement, and
    whether this step's energy gain dE (or dH) - W_ext - W_damping is
    nonpositive up to the audit tolerance.  The parameter condition is
    one-directional: outside it the step may still dissipate.
    """
    condition, _ = _parameter_conditions(model, spec)
    gain, scale = energy_gain(record, model, spec, h)
    return condition, bool(gain <= tol * scale)


def _parameter_conditions(model: LagrangianModel, spec: SchemeSpec) -> tuple[bool, bool]:
    """Per-contact and worst-restitution forms of the parameter condition.

    Comparisons carry a small slack because the standard parameter
    constructions sit exactly on the boundary of their conditions
    (e.g. the second-order weight balance gives gamma - 1/2 equal to the
    averaging shift up to roundoff).
    """
    slack = 1e-12
    v = spec.variant
    if v is SchemeVariant.MOREAU_JEAN:
        th = spec.theta
        per_contact = bool(th >= 0.5 - slack
                           and np.all(th <= 1.0 / (1.0 + model.restitution) + slack))
        max_e = bool(0.5 - slack <= th <= theta_upper_bound(model.restitution) + slack)
        return per_contact, max_e
    if v is SchemeVariant.MOREAU_JEAN_VARIANT:
        cond = bool(spec.theta >= 0.5 - slack)
        return cond, cond
    gamma, beta = spec.gamma, spec.beta
    base = 2 * beta >= gamma - slack and gamma >= 0.5 - slack
    if v is SchemeVariant.NONSMOOTH_NEWMARK:
        return bool(base), bool(base)
    if v is SchemeVariant.NONSMOOTH_HHT:
        alpha = spec.alpha_f
        cond = bool(base and -slack <= alpha <= gamma - 0.5 + slack
                    and gamma - 0.5 <= 0.5 + slack)
        return cond, cond
    region = bool(base and -slack <= spec.eta <= gamma - 0.5 + slack
                  and gamma - 0.5 <= spec.nu + slack)
    if v is SchemeVariant.NONSMOOTH_KH_GENERALIZED_ALPHA:
        return region, region
    # The full averaging scheme only inherits the guarantee when the
    # load/velocity filter terms vanish: no damping, constant loading.
    damping_free = not model.damping.any()
    constant_load = model.forcing.kind.value in ("zero", "constant")
    cond = bool(region and damping_free and constant_load)
    return cond, cond


def energy_gain(record: StepRecord, model: LagrangianModel, spec: SchemeSpec,
                h: float) -> tuple[float, float]:
    """Step energy gain beyond the supplied works, and its audit scale."""
    sp, sn = record.state_prev, record.state_next
    w_ext, w_damp = discrete_works(model, record, spec, h)
    dE = total_energy(model, sn.q, sn.v) - total_energy(model, sp.q, sp.v)
    if spec.variant in THETA_FAMILY:
        dA = dE
        scale = 1.0 + max(abs(dE), abs(w_ext))
    else:
        dA = (algorithmic_energy(model, sn, spec, h)
              - algorithmic_energy(model, sp, spec, h))
        scale = 1.0 + max(abs(dE), abs(dA), abs(w_ext))
    return dA - w_ext - w_damp, scale


def audit_step(model: LagrangianModel, spec: SchemeSpec, h: float,
               record: StepRecord, tol: float = DEFAULT_AUDIT_TOL) -> EnergyReport:
    """Compute every audit quantity for one step and attach it to the record."""
    sp, sn = record.state_prev, record.state_next
    e_prev = total_energy(model, sp.q, sp.v)
    e_next = total_energy(model, sn.q, sn.v)
    if spec.variant in THETA_FAMILY:
        k_next, h_prev, h_next = e_next, e_prev, e_next
    else:
        k_next = e_next + _accel_term(model, sn.a, spec, h)
        h_prev = algorithmic_energy(model, sp, spec, h)
        h_next = algorithmic_energy(model, sn, spec, h)
    w_ext, w_damp = discrete_works(model, record, spec, h)
    w_contact = contact_work(record.U_prev, record.U_next, record.P, _contact_weight(spec))
    w_impact = contact_work(record.U_prev, record.U_next, record.P, 0.5)
    residual = identity_residual(record, model, spec, h)
    gain, scale = energy_gain(record, model, spec, h)
    cond, cond_max = _parameter_conditions(model, spec)
    dissipated = bool(gain <= tol * scale)

    report = EnergyReport(E=e_next, K_alg=k_next, H_alg=h_next, W_ext=w_ext,
                          W_damping=w_damp, W_contact_step=w_contact,
                          W_impact_style=w_impact, identity_residual=residual,
                          residual_scale=scale, energy_gain=gain,
                          dissipation_satisfied=dissipated, condition_satisfied=cond,
                          condition_satisfied_max_e=cond_max)
    record.W_ext = w_ext
    record.W_damping = w_damp
    record.contact_work = w_contact
    record.E_prev, record.E_next = e_prev, e_next
    record.H_prev, record.H_next = h_prev, h_next
    record.identity_residual = residual
    record.report = report
    return report
