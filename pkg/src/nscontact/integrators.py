"""One-step maps for the event-capturing contact schemes.

All schemes share the same skeleton: eliminate the smooth unknowns onto
the contact impulses through a factorized iteration matrix, forecast the
active contact set, try the free-flight step first, and only assemble
and solve the complementarity problem when the free velocities violate
the impact law.  Impulses (not forces) are the contact unknowns, so the
steps stay consistent when an impact happens inside the step.

The iteration matrices are positive definite for every step size h > 0
because the model validator guarantees a positive definite mass matrix
and positive semi-definite damping and stiffness; the Cholesky factor is
cached per (model, scheme, h) and rebuilt whenever any of them changes.
A step never mutates its input state; trajectories are bitwise
reproducible for identical inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import energy as energy_audit
from .errors import InconsistentSpec, LcpFailure, SimulationError, SingularIterationMatrix
from .lcp import LcpProblem, SOLVERS
from .model import (
    LagrangianModel,
    SchemeSpec,
    SchemeVariant,
    StepRecord,
    SystemState,
    gap,
    local_velocity,
)

# Contacts count as non-separating when U_k is below this; admits
# resting contacts sitting at numerical zero.
ACTIVATION_TOL = 1e-12


def active_set(model: LagrangianModel, state: SystemState, h: float) -> tuple[int, ...]:
    """Contacts forecast to close within the step with non-separating velocity.

    The forecast moves the gap by one explicit step of the current
    velocity; a contact enters the set when that forecast gap is
    nonpositive and the contact is not already separating.
    """
    forecast = gap(model, state.q + h * state.v)
    u = local_velocity(model, state.v)
    return tuple(int(a) for a in range(model.m)
                 if forecast[a] <= 0.0 and u[a] <= ACTIVATION_TOL)


@dataclass
class IterationMatrixCache:
    """Factorized per-step linear algebra, valid for one (model, spec, h).

    ``impulse_to_velocity`` maps the full impulse vector to the velocity
    change it induces, and ``delassus`` is its contact-space restriction
    G^T V used to assemble the complementarity matrix on the active set.
    ``coupling`` carries the impulse influence on the acceleration-type
    unknown of the averaging schemes (zero columns for the theta schemes,
    where the velocity is the only eliminated unknown).
    """

    model_ref: int
    spec: SchemeSpec
    h: float
    iter_cho: tuple
    minv_g: np.ndarray
    impulse_to_velocity: np.ndarray
    delassus: np.ndarray
    coupling: np.ndarray

    def matches(self, model: LagrangianModel, spec: SchemeSpec, h: float) -> bool:
        return self.model_ref == id(model) and self.spec == spec and self.h == h


def _factor(matrix: np.ndarray) -> tuple:
    try:
        factor = cho_factor(matrix)
    except np.linalg.LinAlgError as exc:
        raise SingularIterationMatrix(f"iteration matrix not factorizable: {exc}") from exc
    return factor


def build_cache(model: LagrangianModel, spec: SchemeSpec, h: float) -> IterationMatrixCache:
    M, C, K, G = model.mass, model.damping, model.stiffness, model.contact_jacobian
    minv_g = model.solve_mass(G)
    v = spec.variant
    if v is SchemeVariant.MOREAU_JEAN:
        th = spec.theta
        iter_cho = _factor(M + h * th * C + h**2 * th**2 * K)
        impulse_to_velocity = cho_solve(iter_cho, G)
        coupling = np.zeros_like(G)
    elif v is SchemeVariant.MOREAU_JEAN_VARIANT:
        th = spec.theta
        iter_cho = _factor(M + h * th * C + 0.5 * h**2 * th * K)
        impulse_to_velocity = cho_solve(iter_cho, G)
        coupling = np.zeros_like(G)
    elif v is SchemeVariant.NONSMOOTH_KH_GENERALIZED_ALPHA:
        am, af, gamma, beta = spec.alpha_m, spec.alpha_f, spec.gamma, spec.beta
        iter_cho = _factor((1 - am) * M + (1 - am) * h * gamma * C
                           + (1 - af) * h**2 * beta * K)
        load = (1 - am) * C + (1 - af) * (h / 2) * K
        coupling = cho_solve(iter_cho, load @ minv_g)
        impulse_to_velocity = minv_g - h * gamma * coupling
    else:
        am, af, gamma, beta = spec.alpha_m, spec.alpha_f, spec.gamma, spec.beta
        c1 = (1 - af) / (1 - am)
        iter_cho = _factor(M + h * gamma * c1 * C + h**2 * beta * c1 * K)
        load = C + (h / 2) * K
        coupling = cho_solve(iter_cho, load @ minv_g)
        impulse_to_velocity = minv_g - h * gamma * c1 * coupling
    delassus = G.T @ impulse_to_velocity
    return IterationMatrixCache(id(model), spec, h, iter_cho, minv_g,
                                impulse_to_velocity, delassus, coupling)


def _solve_contact(model, state, h, cache, v_free, lcp_solver, lcp_tol):
    """Free flight first; assemble the LCP only when the impact law is violated.

    Accepting the free step when the free local velocities are feasible
    is exact, not an approximation: zero impulse solves that LCP, so the
    outcome is bitwise identical to always solving it.
    """
    m = model.m
    u_prev = local_velocity(model, state.v)
    act = active_set(model, state, h)
    P = np.zeros(m)
    if act:
        idx = list(act)
        b = (model.contact_jacobian.T @ v_free)[idx] + model.restitution[idx] * u_prev[idx]
        if b.min() < 0.0:
            problem = LcpProblem(cache.delassus[np.ix_(idx, idx)], b)
            solution = SOLVERS[lcp_solver](problem, lcp_tol)
            if not solution.solved:
                raise LcpFailure(
                    f"contact subproblem not solved at t={state.t:g}: "
                    f"status={solution.status.value}, residual={solution.residual:.3e}")
            P[idx] = solution.z
    return P, act, u_prev


def _make_record(model, state, new_state, step_index, P, act, u_prev):
    u_next = local_velocity(model, new_state.v)
    w_corr = model.solve_mass(model.contact_jacobian @ P)
    zero_set = tuple(a for a in act if P[a] == 0.0)
    pen = float(max(0.0, -gap(model, new_state.q).min(initial=0.0)))
    return StepRecord(step_index=step_index, t_prev=state.t, t_next=new_state.t,
                      state_prev=state, state_next=new_state, P=P,
                      U_prev=u_prev, U_next=u_next, w_corr=w_corr,
                      active_set=act, zero_impulse_set=zero_set, penetration=pen)


def _step_theta(model, state, h, spec, cache, lcp_solver, lcp_tol, step_index, midpoint_q):
    M, C, K = model.mass, model.damping, model.stiffness
    th = spec.theta
    t0 = state.t
    f_k = model.force(t0)
    f_k1 = model.force(t0 + h)
    f_th = (1 - th) * f_k + th * f_k1

    if midpoint_q:
        # displacement advances with the midpoint velocity regardless of theta
        rhs = (M @ state.v - h * K @ (state.q + 0.5 * h * th * state.v)
               - h * (1 - th) * C @ state.v + h * f_th)
    else:
        rhs = (M @ state.v - h * K @ (state.q + h * th * (1 - th) * state.v)
               - h * (1 - th) * C @ state.v + h * f_th)
    v_free = cho_solve(cache.iter_cho, rhs)

    P, act, u_prev = _solve_contact(model, state, h, cache, v_free, lcp_solver, lcp_tol)
    v1 = v_free + cache.impulse_to_velocity @ P
    if midpoint_q:
        q1 = state.q + 0.5 * h * (state.v + v1)
    else:
        q1 = state.q + h * ((1 - th) * state.v + th * v1)

    # theta steps do not evolve the acceleration variables; re-initialize
    # them consistently so a hand-off to an averaging scheme stays valid
    a1 = model.solve_mass(f_k1 - K @ q1 - C @ v1)
    new_state = SystemState(t=t0 + h, q=q1, v=v1, a=a1, a_tilde=a1.copy(),
                            z=state.z.copy(), x=state.x.copy(), y=state.y.copy(),
                            f_prev=f_k, v_prev=state.v.copy())
    return new_state, _make_record(model, state, new_state, step_index, P, act, u_prev)


def step_moreau_jean(model, state, h, theta=0.5, *, cache=None, lcp_solver="lemke",
                     lcp_tol=1e-10, step_index=0):
    """Advance one step with the impulse theta-scheme.

    The velocity balance and both force-like terms are weighted between
    the step endpoints by theta; the displacement follows the same
    weighted velocity.  Constraints act at the velocity level with the
    Newton impact law on the forecast active set.
    """
    spec = SchemeSpec.moreau_jean(theta)
    if cache is None or not cache.matches(model, spec, h):
        cache = build_cache(model, spec, h)
    return _step_theta(model, state, h, spec, cache, lcp_solver, lcp_tol,
                       step_index, midpoint_q=False)


def step_moreau_jean_variant(model, state, h, theta=0.5, *, cache=None,
                             lcp_solver="lemke", lcp_tol=1e-10, step_index=0):
    """Theta-scheme with a midpoint displacement update.

    Identical to :func:`step_moreau_jean` except that q advances with
    the midpoint velocity for every theta, which removes the restitution
    condition from the scheme's dissipation bound.
    """
    spec = SchemeSpec.moreau_jean_variant(theta)
    if cache is None or not cache.matches(model, spec, h):
        cache = build_cache(model, spec, h)
    return _step_theta(model, state, h, spec, cache, lcp_solver, lcp_tol,
                       step_index, midpoint_q=True)


def _advance_filters(state, new_state, model, h, spec):
    z, x, y = energy_audit.update_filters(model, state, new_state, h, spec)
    new_state.z, new_state.x, new_state.y = z, x, y


def step_generalized_alpha(model, state, h, spec, *, cache=None, lcp_solver="lemke",
                           lcp_tol=1e-10, step_index=0):
    """Averaging-family step (Newmark, HHT, or full generalized-alpha).

    The smooth acceleration at the step end is the eliminated unknown;
    the auxiliary acceleration follows from the averaging recurrence and
    drives the Newmark displacement/velocity predictors.  The contact
    impulse corrects the velocity directly and the displacement with
    half a step's worth of that correction.
    """
    if spec.variant not in (SchemeVariant.NONSMOOTH_NEWMARK, SchemeVariant.NONSMOOTH_HHT,
                            SchemeVariant.NONSMOOTH_GENERALIZED_ALPHA):
        raise InconsistentSpec(f"step_generalized_alpha cannot run {spec.variant.value}")
    if cache is None or not cache.matches(model, spec, h):
        cache = build_cache(model, spec, h)
    C, K = model.damping, model.stiffness
    am, af, gamma, beta = spec.alpha_m, spec.alpha_f, spec.gamma, spec.beta
    c1 = (1 - af) / (1 - am)
    t0 = state.t
    f_k = model.force(t0)
    f_k1 = model.force(t0 + h)

    drift = (af * state.a_tilde - am * state.a) / (1 - am)
    pred_v = state.v + h * (1 - gamma) * state.a + h * gamma * drift
    pred_q = (state.q + h * state.v + h**2 * (0.5 - beta) * state.a
              + h**2 * beta * drift)
    at_free = cho_solve(cache.iter_cho, f_k1 - C @ pred_v - K @ pred_q)
    v_free = pred_v + h * gamma * c1 * at_free

    P, act, u_prev = _solve_contact(model, state, h, cache, v_free, lcp_solver, lcp_tol)
    w_corr = cache.minv_g @ P
    at1 = at_free - cache.coupling @ P
    a1 = c1 * at1 + drift
    v1 = pred_v + h * gamma * c1 * at1 + w_corr
    q1 = pred_q + h**2 * beta * c1 * at1 + 0.5 * h * w_corr

    new_state = SystemState(t=t0 + h, q=q1, v=v1, a=a1, a_tilde=at1,
                            z=state.z, x=state.x, y=state.y,
                            f_prev=f_k, v_prev=state.v.copy())
    _advance_filters(state, new_state, model, h, spec)
    return new_state, _make_record(model, state, new_state, step_index, P, act, u_prev)


def step_kh_generalized_alpha(model, state, h, spec, *, cache=None, lcp_solver="lemke",
                              lcp_tol=1e-10, step_index=0):
    """Averaging step with damping and load weighted like the inertia term.

    One collocation equation in the end-of-step acceleration replaces
    the smooth balance plus averaging recurrence; kinematics and contact
    treatment are unchanged.
    """
    if cache is None or not cache.matches(model, spec, h):
        cache = build_cache(model, spec, h)
    M, C, K = model.mass, model.damping, model.stiffness
    am, af, gamma, beta = spec.alpha_m, spec.alpha_f, spec.gamma, spec.beta
    t0 = state.t
    f_k = model.force(t0)
    f_k1 = model.force(t0 + h)

    pred_v = state.v + h * (1 - gamma) * state.a
    pred_q = state.q + h * state.v + h**2 * (0.5 - beta) * state.a
    rhs = ((1 - am) * f_k1 + am * f_k - am * (M @ state.a + C @ state.v)
           - (1 - am) * C @ pred_v - (1 - af) * K @ pred_q - af * K @ state.q)
    a_free = cho_solve(cache.iter_cho, rhs)
    v_free = pred_v + h * gamma * a_free

    P, act, u_prev = _solve_contact(model, state, h, cache, v_free, lcp_solver, lcp_tol)
    w_corr = cache.minv_g @ P
    a1 = a_free - cache.coupling @ P
    v1 = pred_v + h * gamma * a1 + w_corr
    q1 = pred_q + h**2 * beta * a1 + 0.5 * h * w_corr

    new_state = SystemState(t=t0 + h, q=q1, v=v1, a=a1, a_tilde=a1.copy(),
                            z=state.z, x=state.x, y=state.y,
                            f_prev=f_k, v_prev=state.v.copy())
    _advance_filters(state, new_state, model, h, spec)
    return new_state, _make_record(model, state, new_state, step_index, P, act, u_prev)


def step(model, state, h, spec, **kwargs):
    """Dispatch one step according to the scheme variant."""
    v = spec.variant
    if v is SchemeVariant.MOREAU_JEAN:
        return step_moreau_jean(model, state, h, spec.theta, **kwargs)
    if v is SchemeVariant.MOREAU_JEAN_VARIANT:
        return step_moreau_jean_variant(model, state, h, spec.theta, **kwargs)
    if v is SchemeVariant.NONSMOOTH_KH_GENERALIZED_ALPHA:
        return step_kh_generalized_alpha(model, state, h, spec, **kwargs)
    return step_generalized_alpha(model, state, h, spec, **kwargs)


def simulate(model, initial_state, h, spec, t_end, *, audit=True, audit_tol=1e-10,
             lcp_solver="lemke", lcp_tol=1e-10) -> list[StepRecord]:
    """Run fixed steps from the initial state until t_end.

    Each record carries the step dynamics; with ``audit=True`` the
    energy-audit quantities (works, energies, identity residual,
    dissipation flags) are attached as well.  Identical inputs produce
    bitwise-identical trajectories.

    Raises:
        SimulationError: wraps any step failure with its step index.
    """
    if h <= 0.0:
        raise SimulationError("step size must be positive", step_index=-1)
    n_steps = int(np.floor((t_end - initial_state.t) / h + 1e-9))
    records: list[StepRecord] = []
    state = initial_state
    cache = build_cache(model, spec, h)
    for k in range(n_steps):
        try:
            state, record = step(model, state, h, spec, cache=cache,
                                 lcp_solver=lcp_solver, lcp_tol=lcp_tol, step_index=k)
            if audit:
                energy_audit.audit_step(model, spec, h, record, tol=audit_tol)
        except SimulationError:
            raise
        except Exception as exc:
            raise SimulationError(f"step {k} (t={initial_state.t + k * h:g}) failed: {exc}",
                                  step_index=k) from exc
        records.append(record)
    return records
