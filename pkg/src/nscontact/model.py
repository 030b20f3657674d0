"""Linear Lagrangian systems with unilateral constraints.

A model bundles the constant matrices of a semi-discretized linear
structure (mass, damping, stiffness), a set of linear gap functions
``g(q) = G^T q + w >= 0`` with one restitution coefficient per contact,
and the external force history.  Models are validated once and immutable
afterwards; all integrators and audits consume them read-only, so a
single model can back any number of concurrent simulations.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import (
    DimensionMismatch,
    InconsistentSpec,
    NonSymmetric,
    NotPositiveDefinite,
    RestitutionOutOfRange,
)

# Relative tolerances used by build_model validation.  Strict bitwise
# symmetry would be brittle for user-assembled matrices; rank-deficient
# stiffness (free-free chains) must pass the semi-definiteness check.
SYMMETRY_RTOL = 1e-12
EIGENVALUE_RTOL = 1e-10


# ----------------------------------------------------------------------
# external forcing
# ----------------------------------------------------------------------

class ForcingKind(str, enum.Enum):
    ZERO = "zero"
    CONSTANT = "constant"
    SINUSOIDAL = "sinusoidal"
    PIECEWISE_CONSTANT = "piecewise_constant"


@dataclass(frozen=True)
class ForcingTerm:
    """External force ``F(t)``, restricted to analytic forms.

    Only point evaluations are ever needed (the load filter of the
    energy audit consumes force increments between grid points), so no
    derivative interface exists.
    """

    kind: ForcingKind
    amplitude: np.ndarray                      # n-vector
    omega: float = 0.0
    phase: float = 0.0
    breakpoints: tuple[float, ...] = ()
    values: tuple[tuple[float, ...], ...] = ()  # len(breakpoints)+1 segments

    @staticmethod
    def zero(n: int) -> "ForcingTerm":
        return ForcingTerm(ForcingKind.ZERO, np.zeros(n))

    @staticmethod
    def constant(amplitude) -> "ForcingTerm":
        return ForcingTerm(ForcingKind.CONSTANT, np.asarray(amplitude, dtype=float))

    @staticmethod
    def sinusoidal(amplitude, omega: float, phase: float = 0.0) -> "ForcingTerm":
        return ForcingTerm(ForcingKind.SINUSOIDAL, np.asarray(amplitude, dtype=float),
                           omega=float(omega), phase=float(phase))

    @staticmethod
    def piecewise_constant(breakpoints, values) -> "ForcingTerm":
        """Segment ``i`` holds on [breakpoints[i-1], breakpoints[i])."""
        bp = tuple(float(b) for b in breakpoints)
        if any(b1 <= b0 for b0, b1 in zip(bp, bp[1:])):
            raise InconsistentSpec("piecewise breakpoints must be strictly increasing")
        vals = tuple(tuple(float(x) for x in np.atleast_1d(v)) for v in values)
        if len(vals) != len(bp) + 1:
            raise DimensionMismatch(
                f"piecewise forcing needs {len(bp) + 1} segment values, got {len(vals)}")
        return ForcingTerm(ForcingKind.PIECEWISE_CONSTANT,
                           np.asarray(vals[0], dtype=float),
                           breakpoints=bp, values=vals)

    def evaluate(self, t: float) -> np.ndarray:
        if self.kind is ForcingKind.ZERO:
            return np.zeros_like(self.amplitude)
        if self.kind is ForcingKind.CONSTANT:
            return self.amplitude.copy()
        if self.kind is ForcingKind.SINUSOIDAL:
            return self.amplitude * math.sin(self.omega * t + self.phase)
        seg = int(np.searchsorted(np.asarray(self.breakpoints), t, side="right"))
        return np.asarray(self.values[seg], dtype=float)


# ----------------------------------------------------------------------
# scheme parameterization
# ----------------------------------------------------------------------

class SchemeVariant(str, enum.Enum):
    MOREAU_JEAN = "moreau_jean"
    MOREAU_JEAN_VARIANT = "moreau_jean_variant"
    NONSMOOTH_NEWMARK = "newmark"
    NONSMOOTH_HHT = "hht"
    NONSMOOTH_GENERALIZED_ALPHA = "generalized_alpha"
    NONSMOOTH_KH_GENERALIZED_ALPHA = "kh_generalized_alpha"


ALPHA_FAMILY = frozenset({
    SchemeVariant.NONSMOOTH_NEWMARK,
    SchemeVariant.NONSMOOTH_HHT,
    SchemeVariant.NONSMOOTH_GENERALIZED_ALPHA,
    SchemeVariant.NONSMOOTH_KH_GENERALIZED_ALPHA,
})


@dataclass(frozen=True)
class SchemeSpec:
    """Which time-stepping scheme to run, and with which parameters.

    ``theta`` is only meaningful for the Moreau-Jean pair; the Newmark
    pair (gamma, beta) and the averaging weights (alpha_m, alpha_f)
    parameterize the acceleration-based family.  The derived filter
    constants ``nu`` and ``eta`` drive the energy audit.
    """

    variant: SchemeVariant
    theta: float = 0.5
    gamma: float = 0.5
    beta: float = 0.25
    alpha_m: float = 0.0
    alpha_f: float = 0.0

    def __post_init__(self):
        v = self.variant
        if v in (SchemeVariant.MOREAU_JEAN, SchemeVariant.MOREAU_JEAN_VARIANT):
            if not 0.0 <= self.theta <= 1.0:
                raise InconsistentSpec(f"theta={self.theta} outside [0, 1]")
            return
        if self.alpha_m >= 1.0 or self.alpha_f >= 1.0:
            raise InconsistentSpec("averaging weights must stay below 1")
        if self.beta < 0.0 or self.gamma < 0.0:
            raise InconsistentSpec("gamma and beta must be nonnegative")
        if v is SchemeVariant.NONSMOOTH_NEWMARK and (self.alpha_m or self.alpha_f):
            raise InconsistentSpec("Newmark requires alpha_m = alpha_f = 0")
        if v is SchemeVariant.NONSMOOTH_HHT:
            if self.alpha_m != 0.0:
                raise InconsistentSpec("HHT requires alpha_m = 0")
            if not 0.0 <= self.alpha_f <= 1.0 / 3.0 + 1e-15:
                raise InconsistentSpec(f"HHT weight alpha={self.alpha_f} outside [0, 1/3]")

    # derived filter constants of the averaging family
    @property
    def nu(self) -> float:
        return 0.5 - self.alpha_m

    @property
    def eta(self) -> float:
        return self.alpha_f - self.alpha_m

    @property
    def eta_over_nu(self) -> float:
        """Finite ratio eta/nu.

        At the minimal-damping corner (alpha_m = alpha_f = 1/2, i.e.
        spectral radius one) both constants vanish; the limit along the
        spectral-radius parameterization is 2/3.  The filter states are
        identically zero there, so the placeholder never contributes.
        """
        if self.nu != 0.0:
            return self.eta / self.nu
        return 2.0 / 3.0

    # ---- constructors ----

    @staticmethod
    def moreau_jean(theta: float = 0.5) -> "SchemeSpec":
        return SchemeSpec(SchemeVariant.MOREAU_JEAN, theta=float(theta))

    @staticmethod
    def moreau_jean_variant(theta: float = 0.5) -> "SchemeSpec":
        return SchemeSpec(SchemeVariant.MOREAU_JEAN_VARIANT, theta=float(theta))

    @staticmethod
    def newmark(gamma: float = 0.5, beta: float | None = None) -> "SchemeSpec":
        gamma = float(gamma)
        if beta is None:
            beta = 0.25 * (gamma + 0.5) ** 2
        return SchemeSpec(SchemeVariant.NONSMOOTH_NEWMARK, gamma=gamma, beta=float(beta))

    @staticmethod
    def hht(alpha: float, gamma: float | None = None,
            beta: float | None = None) -> "SchemeSpec":
        alpha = float(alpha)
        if gamma is None:
            gamma = 0.5 + alpha          # second-order weight balance
        if beta is None:
            beta = 0.25 * (gamma + 0.5) ** 2
        return SchemeSpec(SchemeVariant.NONSMOOTH_HHT, gamma=float(gamma),
                          beta=float(beta), alpha_m=0.0, alpha_f=alpha)

    @staticmethod
    def generalized_alpha(alpha_m: float, alpha_f: float, gamma: float | None = None,
                          beta: float | None = None,
                          variant: SchemeVariant = SchemeVariant.NONSMOOTH_GENERALIZED_ALPHA,
                          ) -> "SchemeSpec":
        alpha_m, alpha_f = float(alpha_m), float(alpha_f)
        if gamma is None:
            gamma = 0.5 + alpha_f - alpha_m   # second-order weight balance
        if beta is None:
            beta = 0.25 * (gamma + 0.5) ** 2
        return SchemeSpec(variant, gamma=float(gamma), beta=float(beta),
                          alpha_m=alpha_m, alpha_f=alpha_f)

    @staticmethod
    def kh_generalized_alpha(alpha_m: float, alpha_f: float, gamma: float | None = None,
                             beta: float | None = None) -> "SchemeSpec":
        return SchemeSpec.generalized_alpha(
            alpha_m, alpha_f, gamma, beta,
            variant=SchemeVariant.NONSMOOTH_KH_GENERALIZED_ALPHA)

    @staticmethod
    def from_rho_infinity(rho: float,
                          variant: SchemeVariant = SchemeVariant.NONSMOOTH_GENERALIZED_ALPHA,
                          ) -> "SchemeSpec":
        """High-frequency damping knob: rho = 1 none, rho = 0 maximal."""
        rho = float(rho)
        if not 0.0 <= rho <= 1.0:
            raise InconsistentSpec(f"spectral radius {rho} outside [0, 1]")
        alpha_m = (2.0 * rho - 1.0) / (rho + 1.0)
        alpha_f = rho / (rho + 1.0)
        return SchemeSpec.generalized_alpha(alpha_m, alpha_f, variant=variant)

    @property
    def is_alpha_family(self) -> bool:
        return self.variant in ALPHA_FAMILY

    def describe(self) -> str:
        if self.variant in (SchemeVariant.MOREAU_JEAN, SchemeVariant.MOREAU_JEAN_VARIANT):
            return f"{self.variant.value}(theta={self.theta})"
        return (f"{self.variant.value}(gamma={self.gamma}, beta={self.beta}, "
                f"alpha_m={self.alpha_m}, alpha_f={self.alpha_f})")


# ----------------------------------------------------------------------
# model and state
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class LagrangianModel:
    """Validated linear model with unilateral constraints.

    Attributes:
        n: number of generalized coordinates.
        m: number of unilateral constraints (columns of the jacobian).
        mass, damping, stiffness: constant n-by-n matrices.
        contact_jacobian: n-by-m matrix mapping impulses to generalized
            forces; its transpose maps velocities to contact velocities.
        gap_offset: m-vector shifting the gaps, g(q) = G^T q + w.
        restitution: m-vector of Newton coefficients in [0, 1].
        forcing: external force history F(t).
    """

    n: int
    m: int
    mass: np.ndarray
    damping: np.ndarray
    stiffness: np.ndarray
    contact_jacobian: np.ndarray
    gap_offset: np.ndarray
    restitution: np.ndarray
    forcing: ForcingTerm
    mass_cho: tuple = field(repr=False, compare=False, default=None)

    def solve_mass(self, rhs: np.ndarray) -> np.ndarray:
        """M^{-1} rhs through the cached Cholesky factor."""
        return cho_solve(self.mass_cho, rhs)

    def force(self, t: float) -> np.ndarray:
        return self.forcing.evaluate(t)

    def with_restitution(self, restitution) -> "LagrangianModel":
        """Same structure, different restitution vector (revalidated)."""
        e = np.broadcast_to(np.asarray(restitution, dtype=float), (self.m,)).copy()
        if np.any(e < 0.0) or np.any(e > 1.0):
            raise RestitutionOutOfRange(f"restitution {e} outside [0, 1]")
        return replace(self, restitution=e)


def _check_symmetric(a: np.ndarray, name: str) -> None:
    skew = np.abs(a - a.T).max(initial=0.0)
    if skew > SYMMETRY_RTOL * (1.0 + np.abs(a).max(initial=0.0)):
        raise NonSymmetric(f"{name} is not symmetric (max skew {skew:.3e})")


def _check_psd(a: np.ndarray, name: str) -> None:
    eigs = np.linalg.eigvalsh(0.5 * (a + a.T))
    floor = -EIGENVALUE_RTOL * max(np.abs(eigs).max(initial=0.0), 1e-300)
    if eigs.min(initial=0.0) < floor:
        raise NotPositiveDefinite(
            f"{name} has eigenvalue {eigs.min():.3e} below the semi-definite floor")


def build_model(mass, damping, stiffness, contact_jacobian, gap_offset,
                restitution, forcing: ForcingTerm) -> LagrangianModel:
    """Validate and assemble a model; caches the mass Cholesky factor.

    Raises:
        DimensionMismatch: inconsistent array shapes (names the field).
        NonSymmetric: mass/damping/stiffness beyond the symmetry tolerance.
        NotPositiveDefinite: mass not positive definite, or damping or
            stiffness with an eigenvalue below the semi-definite floor.
        RestitutionOutOfRange: a coefficient outside [0, 1].
    """
    mass = np.array(mass, dtype=float)
    damping = np.array(damping, dtype=float)
    stiffness = np.array(stiffness, dtype=float)
    contact_jacobian = np.array(contact_jacobian, dtype=float)
    gap_offset = np.atleast_1d(np.array(gap_offset, dtype=float))
    restitution = np.atleast_1d(np.array(restitution, dtype=float))

    if mass.ndim != 2 or mass.shape[0] != mass.shape[1] or mass.shape[0] < 1:
        raise DimensionMismatch(f"mass must be square and nonempty, got {mass.shape}")
    n = mass.shape[0]
    for name, mat in (("damping", damping), ("stiffness", stiffness)):
        if mat.shape != (n, n):
            raise DimensionMismatch(f"{name} must be {n}x{n}, got {mat.shape}")
    if contact_jacobian.ndim != 2 or contact_jacobian.shape[0] != n:
        raise DimensionMismatch(
            f"contact_jacobian must have {n} rows, got {contact_jacobian.shape}")
    m = contact_jacobian.shape[1]
    if m < 1:
        raise DimensionMismatch("at least one unilateral constraint is required")
    if gap_offset.shape != (m,):
        raise DimensionMismatch(f"gap_offset must have length {m}, got {gap_offset.shape}")
    if restitution.shape == (1,) and m > 1:
        restitution = np.full(m, restitution[0])
    if restitution.shape != (m,):
        raise DimensionMismatch(f"restitution must have length {m}, got {restitution.shape}")

    _check_symmetric(mass, "mass")
    _check_symmetric(damping, "damping")
    _check_symmetric(stiffness, "stiffness")
    try:
        factor = cho_factor(mass)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"mass is not positive definite: {exc}") from exc
    if np.any(np.diag(factor[0]) <= 0.0):
        raise NotPositiveDefinite("mass is not positive definite")
    _check_psd(damping, "damping")
    _check_psd(stiffness, "stiffness")

    if np.any(restitution < 0.0) or np.any(restitution > 1.0):
        raise RestitutionOutOfRange(f"restitution {restitution} outside [0, 1]")

    f0 = np.atleast_1d(np.asarray(forcing.evaluate(0.0), dtype=float))
    if f0.shape != (n,):
        raise DimensionMismatch(f"forcing must evaluate to length {n}, got {f0.shape}")

    return LagrangianModel(n=n, m=m, mass=mass, damping=damping, stiffness=stiffness,
                           contact_jacobian=contact_jacobian, gap_offset=gap_offset,
                           restitution=restitution, forcing=forcing, mass_cho=factor)


def gap(model: LagrangianModel, q: np.ndarray) -> np.ndarray:
    """Contact gaps g(q) = G^T q + w; nonnegative means separated."""
    q = np.asarray(q, dtype=float)
    if q.shape != (model.n,):
        raise DimensionMismatch(f"q must have length {model.n}, got {q.shape}")
    return model.contact_jacobian.T @ q + model.gap_offset


def local_velocity(model: LagrangianModel, v: np.ndarray) -> np.ndarray:
    """Normal relative velocities at the contacts, U = G^T v."""
    v = np.asarray(v, dtype=float)
    if v.shape != (model.n,):
        raise DimensionMismatch(f"v must have length {model.n}, got {v.shape}")
    return model.contact_jacobian.T @ v


@dataclass
class SystemState:
    """Full per-instant state owned by one simulation run.

    Besides (t, q, v) it carries the auxiliary acceleration ``a`` and
    the smooth acceleration ``a_tilde`` used by the averaging schemes,
    the three first-order filter states (z from displacement increments,
    x from velocity increments, y from load increments) that the energy
    audit tracks, and previous-step caches (f_prev, v_prev) consumed by
    the multi-step work formulas.
    """

    t: float
    q: np.ndarray
    v: np.ndarray
    a: np.ndarray
    a_tilde: np.ndarray
    z: np.ndarray
    x: np.ndarray
    y: np.ndarray
    f_prev: np.ndarray
    v_prev: np.ndarray

    def copy(self) -> "SystemState":
        return SystemState(self.t, self.q.copy(), self.v.copy(), self.a.copy(),
                           self.a_tilde.copy(), self.z.copy(), self.x.copy(),
                           self.y.copy(), self.f_prev.copy(), self.v_prev.copy())


def initial_state(model: LagrangianModel, q0, v0, t0: float = 0.0) -> SystemState:
    """Consistent start state: a0 balances the smooth equation of motion.

    Filter states start at zero and the virtual previous step replicates
    the initial data, which makes the first-step multi-step works exact.
    """
    q0 = np.asarray(q0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    if q0.shape != (model.n,):
        raise DimensionMismatch(f"q0 must have length {model.n}, got {q0.shape}")
    if v0.shape != (model.n,):
        raise DimensionMismatch(f"v0 must have length {model.n}, got {v0.shape}")
    f0 = model.force(t0)
    a0 = model.solve_mass(f0 - model.stiffness @ q0 - model.damping @ v0)
    zeros = np.zeros(model.n)
    return SystemState(t=float(t0), q=q0.copy(), v=v0.copy(), a=a0, a_tilde=a0.copy(),
                       z=zeros.copy(), x=zeros.copy(), y=zeros.copy(),
                       f_prev=f0, v_prev=v0.copy())


@dataclass
class StepRecord:
    """Everything one step produced, plus the audit quantities.

    The dynamic fields are filled by the integrator; the works, energies,
    residual and flags are attached by the energy audit.  ``state_prev``
    and ``state_next`` are kept so that audits can be recomputed offline.
    """

    step_index: int
    t_prev: float
    t_next: float
    state_prev: SystemState
    state_next: SystemState
    P: np.ndarray
    U_prev: np.ndarray
    U_next: np.ndarray
    w_corr: np.ndarray
    active_set: tuple[int, ...]
    zero_impulse_set: tuple[int, ...]
    penetration: float = 0.0
    W_ext: float = 0.0
    W_damping: float = 0.0
    contact_work: float = 0.0
    E_prev: float = 0.0
    E_next: float = 0.0
    H_prev: float = 0.0
    H_next: float = 0.0
    identity_residual: float = 0.0
    report: "object" = None
