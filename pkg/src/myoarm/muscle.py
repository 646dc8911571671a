"""Hill-type muscle-tendon unit.

A lumped muscle model: first-order excitation-to-activation dynamics, an
active force-length curve, a passive elastic element, a force-velocity
relation, and a series-elastic tendon with an exponential toe region.
Fiber velocity is obtained each tick by enforcing force balance between
fiber and tendon and inverting the force-velocity curve, so the only
continuous states per muscle are activation and normalized fiber length.

Conventions: fiber length is normalized by ``l0_fiber``, fiber velocity by
``l0_fiber`` per second (positive = lengthening), tendon strain is
``l_t / l_slack_tendon - 1``, and all force curves are normalized by
``f0_max``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "MuscleParams",
    "MuscleState",
    "MuscleDiagnostics",
    "activation_time_constant",
    "activation_rate",
    "active_force_length",
    "passive_force_length",
    "force_velocity",
    "inverse_force_velocity",
    "tendon_force",
    "fiber_velocity_from_equilibrium",
    "step_muscle",
    "FV_SUP",
    "FV_AT_MINUS_ONE",
]

# Supremum of the force-velocity curve (approached as v -> 1-).
FV_SUP = 1.6

# Left end of the physiological shortening range; fv(-1) evaluated once for
# the equilibrium-argument clamp.
_FV_BRANCH_LO = 1.0 - math.sqrt(22.0)  # below this the curve turns over


def _fv_exponent(v: float) -> float:
    w = 1.0 - v
    return -1.1 / w**4 + 0.1 / w**2


def force_velocity(v_norm: float) -> float:
    """Normalized force-velocity multiplier.

    Monotone increasing on the shortening/lengthening range, ~1 at
    isometric, approaching 1.6 at the eccentric asymptote. Defined for
    v_norm < 1 only.
    """
    if v_norm >= 1.0:
        raise ValueError(f"force_velocity undefined for v_norm >= 1 (got {v_norm})")
    return FV_SUP - FV_SUP * math.exp(_fv_exponent(v_norm))


FV_AT_MINUS_ONE = force_velocity(-1.0)  # ~0.0685


def inverse_force_velocity(fv_target: float) -> float:
    """Invert the force-velocity curve by safeguarded Newton iteration.

    fv_target must lie strictly inside (0, 1.6). The root bracket covers the
    full monotone branch, so targets below fv(-1) resolve to super-maximal
    shortening velocities (< -1) rather than failing.
    """
    if not (0.0 < fv_target < FV_SUP):
        raise ValueError(f"fv_target must be in (0, 1.6), got {fv_target}")
    lo, hi = _FV_BRANCH_LO + 1e-9, 1.0 - 1e-9
    # force_velocity(lo) < 0 < fv_target and fv saturates to 1.6 well before
    # hi, so a sign change is guaranteed.
    v = 0.0 if FV_AT_MINUS_ONE <= fv_target else -1.0
    for _ in range(200):
        g = _fv_exponent(v)
        ex = math.exp(g)
        f = FV_SUP - FV_SUP * ex - fv_target
        # The curve flattens toward its supremum, so the residual tolerance
        # must sit near machine noise for the inverse to stay sharp in v.
        if abs(f) <= 4e-15:
            return v
        if f > 0.0:
            hi = v
        else:
            lo = v
        w = 1.0 - v
        deriv = -FV_SUP * ex * (-4.4 / w**5 + 0.2 / w**3)
        if deriv > 0.0:
            step = v - f / deriv
            v = step if lo < step < hi else 0.5 * (lo + hi)
        else:
            v = 0.5 * (lo + hi)
        if hi - lo < 1e-14:
            return v
    return v


def active_force_length(l_norm: float, gamma: float = 0.45) -> float:
    """Gaussian active force-length curve, peak 1 at optimal fiber length."""
    d = l_norm - 1.0
    return math.exp(-2.0 * d * d / gamma)


def passive_force_length(l_norm: float, k_pe: float = 4.0, eps0_m: float = 0.6) -> float:
    """Exponential passive fiber elasticity, normalized to 1 at strain eps0_m."""
    return (math.exp(k_pe * (l_norm - 1.0) / eps0_m) - 1.0) / (math.exp(k_pe) - 1.0)


@dataclass
class MuscleParams:
    """Parameters of one muscle-tendon unit.

    ``eps_toe`` and ``k_lin`` are derived properties, never stored: the
    linear-branch gain is recomputed from slope continuity at the toe break
    so the tendon curve is C1 to machine precision.
    """

    f0_max: float = 300.0          # peak isometric force, N
    l0_fiber: float = 0.10         # optimal fiber length, m
    l_slack_tendon: float = 0.05   # tendon slack length, m
    pennation_factor: float = 1.0  # cos of pennation angle
    t_act: float = 0.010           # activation time constant, s
    t_deact: float = 0.040         # deactivation time constant, s
    gamma: float = 0.45            # active force-length shape
    k_pe: float = 4.0              # passive exponential shape
    eps0_m: float = 0.6            # passive strain at normalized force 1
    eps0_t: float = 0.04           # tendon strain at normalized force 1
    k_toe: float = 3.0             # toe-region exponential shape
    f_toe: float = 0.33            # normalized force at the toe/linear break
    a_min: float = 0.01            # activation floor in the equilibrium solve

    def __post_init__(self) -> None:
        for name in ("f0_max", "l0_fiber", "l_slack_tendon", "pennation_factor",
                     "t_act", "t_deact", "gamma", "k_pe", "eps0_m", "eps0_t",
                     "k_toe"):
            v = getattr(self, name)
            if not v > 0.0:
                raise ValueError(f"MuscleParams.{name} must be > 0, got {v}")
        if not 0.0 < self.f_toe < 1.0:
            raise ValueError(f"MuscleParams.f_toe must be in (0, 1), got {self.f_toe}")
        if not 0.0 < self.a_min < 1.0:
            raise ValueError(f"MuscleParams.a_min must be in (0, 1), got {self.a_min}")
        if not 0.0 < self.pennation_factor <= 1.0:
            raise ValueError("MuscleParams.pennation_factor must be in (0, 1]")

    @property
    def eps_toe(self) -> float:
        """Tendon strain at the toe/linear transition."""
        return 0.609 * self.eps0_t

    @property
    def k_lin(self) -> float:
        """Linear-branch stiffness from slope continuity at eps_toe (~1.711/eps0_t)."""
        return (self.f_toe * self.k_toe * math.exp(self.k_toe)
                / ((math.exp(self.k_toe) - 1.0) * self.eps_toe))


@dataclass
class MuscleState:
    """Continuous state of one muscle: activation and normalized fiber length.

    ``v_fiber_norm`` caches the most recent equilibrium fiber velocity.
    """

    activation: float = 0.01
    l_fiber_norm: float = 1.0
    v_fiber_norm: float = 0.0


@dataclass
class MuscleDiagnostics:
    """Counters for clamp events inside the equilibrium solve."""

    fv_clamp_events: int = 0
    activation_floor_events: int = 0
    slack_tendon_events: int = 0

    def merge(self, other: "MuscleDiagnostics") -> None:
        self.fv_clamp_events += other.fv_clamp_events
        self.activation_floor_events += other.activation_floor_events
        self.slack_tendon_events += other.slack_tendon_events


def activation_time_constant(u: float, a: float, params: MuscleParams) -> float:
    """Effective first-order time constant; faster when excitation leads activation."""
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"excitation u must be in [0, 1], got {u}")
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"activation a must be in [0, 1], got {a}")
    if u >= a:
        return params.t_act * (0.5 + 1.5 * a)
    return params.t_deact / (0.5 + 1.5 * a)


def activation_rate(u: float, a: float, params: MuscleParams) -> float:
    """da/dt of the first-order activation dynamics."""
    return (u - a) / activation_time_constant(u, a, params)


def tendon_force(strain: float, params: MuscleParams,
                 diag: MuscleDiagnostics | None = None) -> float:
    """Normalized tendon force: exponential toe then linear, C1 at the break.

    Slack tendon (strain <= 0) carries no force.
    """
    if strain <= 0.0:
        if strain < 0.0 and diag is not None:
            diag.slack_tendon_events += 1
        return 0.0
    eps_toe = params.eps_toe
    if strain <= eps_toe:
        return (params.f_toe / (math.exp(params.k_toe) - 1.0)
                * (math.exp(params.k_toe * strain / eps_toe) - 1.0))
    return params.k_lin * (strain - eps_toe) + params.f_toe


# Clamp window for the fv-curve argument in the equilibrium solve: stay a
# hair inside the invertible range so the root search is always bracketed.
_FV_ARG_LO = FV_AT_MINUS_ONE + 1e-6
_FV_ARG_HI = FV_SUP - 1e-6


def fiber_velocity_from_equilibrium(state: MuscleState, a: float, l_mtu: float,
                                    params: MuscleParams,
                                    diag: MuscleDiagnostics | None = None) -> float:
    """Fiber velocity that balances tendon force against fiber force.

    The tendon force implied by the current geometry is attributed to the
    fiber, and the force-velocity curve is inverted:
    v = fv^-1((f_t/cos(alpha) - f_pe) / (a * f_l)). Activation is floored at
    ``a_min`` and the fv argument clamped to the invertible range; both
    events are counted in ``diag`` when given.
    """
    if l_mtu <= 0.0:
        raise ValueError(f"l_mtu must be positive, got {l_mtu}")
    cos_a = params.pennation_factor
    l_tendon = l_mtu - state.l_fiber_norm * params.l0_fiber * cos_a
    strain = l_tendon / params.l_slack_tendon - 1.0
    f_t = tendon_force(strain, params, diag)

    a_eff = a
    if a_eff < params.a_min:
        a_eff = params.a_min
        if diag is not None:
            diag.activation_floor_events += 1
    fl = active_force_length(state.l_fiber_norm, params.gamma)
    fpe = passive_force_length(state.l_fiber_norm, params.k_pe, params.eps0_m)

    arg = (f_t / cos_a - fpe) / (a_eff * fl)
    if arg < _FV_ARG_LO:
        arg = _FV_ARG_LO
        if diag is not None:
            diag.fv_clamp_events += 1
    elif arg > _FV_ARG_HI:
        arg = _FV_ARG_HI
        if diag is not None:
            diag.fv_clamp_events += 1
    return inverse_force_velocity(arg)


def step_muscle(state: MuscleState, u: float, l_mtu: float, dt: float,
                params: MuscleParams,
                diag: MuscleDiagnostics | None = None) -> tuple[MuscleState, float]:
    """Advance one muscle by dt and return (new state, tendon force in N).

    The returned force is the tendon force at the entry geometry, i.e. the
    force acting over [t, t+dt). Activation uses the exact exponential step
    of the first-order dynamics with the time constant frozen over the
    tick; fiber length is advanced by explicit Euler on the equilibrium
    velocity.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    cos_a = params.pennation_factor
    l_tendon = l_mtu - state.l_fiber_norm * params.l0_fiber * cos_a
    strain = l_tendon / params.l_slack_tendon - 1.0
    force = params.f0_max * tendon_force(strain, params, diag)

    tau = activation_time_constant(u, state.activation, params)
    a_new = u + (state.activation - u) * math.exp(-dt / tau)

    probe = MuscleState(a_new, state.l_fiber_norm, state.v_fiber_norm)
    v = fiber_velocity_from_equilibrium(probe, a_new, l_mtu, params, diag)
    l_new = state.l_fiber_norm + v * dt
    return MuscleState(a_new, l_new, v), force


def curve_samples(params: MuscleParams, n: int = 201) -> list[tuple[float, float, float, float, float]]:
    """Sample the four normalized curves over a shared sweep parameter.

    Each row is (x, fl, fpe, fv, ft) with x in [0, 1]: fl and fpe are
    evaluated at fiber length 0.5 + x, fv at velocity 2x - 1 (capped below
    the eccentric asymptote), ft at tendon strain 2x * eps0_t.
    """
    rows = []
    for i in range(n):
        x = i / (n - 1)
        l = 0.5 + x
        v = min(2.0 * x - 1.0, 0.999)
        strain = 2.0 * x * params.eps0_t
        rows.append((
            x,
            active_force_length(l, params.gamma),
            passive_force_length(l, params.k_pe, params.eps0_m),
            force_velocity(v),
            tendon_force(strain, params),
        ))
    return rows
