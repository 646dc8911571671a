"""Tendon-routed rigid-link arm.

A planar serial chain of revolute joints driven by Hill-type muscles through
constant-moment-arm tendon routing. Each muscle spans exactly one joint and
every joint carries at least one antagonist pair. Muscle-tendon length
responds to posture as l_i = l_ref_i - sign_i * r_i * (q_j - q_ref_j), so the
moment-arm matrix L (with L[i, j] = sign_i * r_i) satisfies dl = -L dq, and
tendon tensions map to joint torques through tau = L^T f (a taut muscle that
shortens when its joint angle grows pulls that angle up).

Rigid-body dynamics use a planar recursive Newton-Euler formulation, exact
for arbitrary chain length, with an optional point mass rigidly attached to
the end effector (payload). Integration is classic RK4 on (q, qdot) with
muscle forces frozen over the tick and hard joint stops applied afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .muscle import MuscleDiagnostics, MuscleParams, MuscleState, step_muscle

__all__ = [
    "LinkParams",
    "MuscleRoute",
    "ArmModel",
    "ArmState",
    "StepInfo",
    "IntegrationDivergedError",
    "muscle_lengths",
    "moment_arm_matrix",
    "joint_torques",
    "forward_kinematics",
    "joint_positions",
    "task_jacobian",
    "ik_velocity",
    "mass_matrix",
    "bias_forces",
    "forward_dynamics",
    "total_energy",
    "integrate_step",
    "rest_state",
]


class IntegrationDivergedError(RuntimeError):
    """Raised when the integrator produces non-finite state; carries the last good state."""

    def __init__(self, message: str, last_state: "ArmState"):
        super().__init__(message)
        self.last_state = last_state


@dataclass
class LinkParams:
    length: float   # joint-to-joint distance, m
    mass: float     # kg
    com: float      # center-of-mass offset along the link axis, m
    inertia: float  # rotational inertia about the COM, kg m^2

    def __post_init__(self) -> None:
        for name in ("length", "mass", "inertia"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"LinkParams.{name} must be > 0")
        if not 0.0 <= self.com <= self.length:
            raise ValueError("LinkParams.com must lie on the link")


@dataclass
class MuscleRoute:
    """Constant-moment-arm routing of one muscle over one joint."""

    joint: int         # joint index the muscle spans
    moment_arm: float  # m, > 0
    sign: int          # +1 pulls the joint positive, -1 negative
    l_ref: float       # muscle-tendon length at the reference posture, m

    def __post_init__(self) -> None:
        if self.sign not in (-1, 1):
            raise ValueError("MuscleRoute.sign must be +1 or -1")
        if not self.moment_arm > 0.0:
            raise ValueError("MuscleRoute.moment_arm must be > 0")
        if not self.l_ref > 0.0:
            raise ValueError("MuscleRoute.l_ref must be > 0")


@dataclass
class ArmModel:
    links: list[LinkParams]
    joint_limits: list[tuple[float, float]]
    routing: list[MuscleRoute]
    muscles: list[MuscleParams]
    gravity: tuple[float, float] = (0.0, 0.0)
    viscous_friction: float = 0.0          # N m s/rad, same for every joint
    q_ref: tuple[float, ...] = ()          # reference posture for the routing lengths
    tip_mass: float = 0.0                  # payload point mass at the end effector, kg

    def __post_init__(self) -> None:
        n = len(self.links)
        if n == 0:
            raise ValueError("ArmModel needs at least one link")
        if len(self.joint_limits) != n:
            raise ValueError("one joint-limit pair per joint required")
        for lo, hi in self.joint_limits:
            if not lo < hi:
                raise ValueError(f"joint limit ({lo}, {hi}) is empty")
        if len(self.routing) != len(self.muscles):
            raise ValueError("routing and muscles must pair up one-to-one")
        if not self.q_ref:
            self.q_ref = tuple(0.0 for _ in range(n))
        if len(self.q_ref) != n:
            raise ValueError("q_ref must have one entry per joint")
        if self.tip_mass < 0.0:
            raise ValueError("tip_mass must be >= 0")
        if self.viscous_friction < 0.0:
            raise ValueError("viscous_friction must be >= 0")
        signs_by_joint: dict[int, set[int]] = {}
        for route in self.routing:
            if not 0 <= route.joint < n:
                raise ValueError(f"route references joint {route.joint} outside the chain")
            signs_by_joint.setdefault(route.joint, set()).add(route.sign)
        for j in range(n):
            if signs_by_joint.get(j, set()) != {-1, 1}:
                raise ValueError(f"joint {j} must be spanned by muscles of both signs")
        # A well-posed model must have an invertible mass matrix everywhere.
        h = mass_matrix(self, np.array(self.q_ref))
        if np.linalg.cond(h) > 1e12:
            raise ValueError("mass matrix ill-conditioned at q_ref; check link masses/inertias")

    @property
    def n_joints(self) -> int:
        return len(self.links)

    @property
    def n_muscles(self) -> int:
        return len(self.muscles)

    def agonists(self, joint: int) -> list[int]:
        """Indices of muscles pulling this joint positive."""
        return [i for i, r in enumerate(self.routing) if r.joint == joint and r.sign > 0]

    def antagonists(self, joint: int) -> list[int]:
        """Indices of muscles pulling this joint negative."""
        return [i for i, r in enumerate(self.routing) if r.joint == joint and r.sign < 0]

    def with_tip_mass(self, tip_mass: float) -> "ArmModel":
        return replace(self, links=list(self.links), joint_limits=list(self.joint_limits),
                       routing=list(self.routing), muscles=list(self.muscles),
                       tip_mass=tip_mass)


@dataclass
class ArmState:
    q: np.ndarray
    qdot: np.ndarray
    muscle_states: list[MuscleState]

    def copy(self) -> "ArmState":
        return ArmState(self.q.copy(), self.qdot.copy(),
                        [MuscleState(m.activation, m.l_fiber_norm, m.v_fiber_norm)
                         for m in self.muscle_states])


@dataclass
class StepInfo:
    """Per-tick byproducts of integrate_step."""

    tendon_forces: np.ndarray
    joint_torques: np.ndarray
    stop_events: int = 0


def muscle_lengths(model: ArmModel, q: np.ndarray) -> np.ndarray:
    """Muscle-tendon lengths at posture q (constant moment arms)."""
    out = np.empty(model.n_muscles)
    for i, route in enumerate(model.routing):
        dq = q[route.joint] - model.q_ref[route.joint]
        out[i] = route.l_ref - route.sign * route.moment_arm * dq
    return out


def moment_arm_matrix(model: ArmModel, q: np.ndarray) -> np.ndarray:
    """L with L[i, j] = sign_i * r_i on the spanned joint; equals -d(l)/dq."""
    L = np.zeros((model.n_muscles, model.n_joints))
    for i, route in enumerate(model.routing):
        L[i, route.joint] = route.sign * route.moment_arm
    return L


def joint_torques(model: ArmModel, q: np.ndarray, tendon_forces: np.ndarray) -> np.ndarray:
    """Joint torques from tendon tensions: tau = L^T f, tensions only."""
    f = np.asarray(tendon_forces, dtype=float)
    if f.shape != (model.n_muscles,):
        raise ValueError(f"expected {model.n_muscles} tendon forces, got shape {f.shape}")
    if np.any(f < 0.0):
        raise ValueError("tendon forces must be non-negative (tendons only pull)")
    return moment_arm_matrix(model, q).T @ f


def joint_positions(model: ArmModel, q: np.ndarray) -> np.ndarray:
    """(n+1) x 2 chain of joint origins ending at the tip."""
    pts = np.zeros((model.n_joints + 1, 2))
    phi = 0.0
    x = y = 0.0
    for i, link in enumerate(model.links):
        phi += float(q[i])
        x += link.length * math.cos(phi)
        y += link.length * math.sin(phi)
        pts[i + 1] = (x, y)
    return pts


def forward_kinematics(model: ArmModel, q: np.ndarray) -> np.ndarray:
    """End-effector position in the base frame."""
    return joint_positions(model, q)[-1]


def task_jacobian(model: ArmModel, q: np.ndarray) -> np.ndarray:
    """Analytic 2 x n Jacobian of the tip position."""
    pts = joint_positions(model, q)
    tip = pts[-1]
    J = np.empty((2, model.n_joints))
    for j in range(model.n_joints):
        d = tip - pts[j]
        J[0, j] = -d[1]
        J[1, j] = d[0]
    return J


def ik_velocity(model: ArmModel, p_dot: np.ndarray, q: np.ndarray,
                k_q: np.ndarray | None = None,
                sigma_min_threshold: float = 1e-4,
                damping: float = 1e-6) -> tuple[np.ndarray, bool]:
    """Resolve task velocity to joint velocity with null-space bias.

    qdot = J+ pdot + (I - J+ J) k_q, with J+ = J^T (J J^T)^-1. Near
    singularity (smallest singular value below the threshold) the inverse is
    damped and the returned flag is True.
    """
    J = task_jacobian(model, q)
    JJt = J @ J.T
    eigs = np.linalg.eigvalsh(JJt)
    singular = bool(math.sqrt(max(eigs[0], 0.0)) < sigma_min_threshold)
    if singular:
        JJt = JJt + damping * np.eye(2)
    J_pinv = J.T @ np.linalg.inv(JJt)
    qdot = J_pinv @ np.asarray(p_dot, dtype=float)
    if k_q is not None:
        k_q = np.asarray(k_q, dtype=float)
        qdot = qdot + k_q - J_pinv @ (J @ k_q)
    return qdot, singular


def _rne(model: ArmModel, q, qdot, qddot, with_gravity: bool) -> list[float]:
    """Planar recursive Newton-Euler inverse dynamics (pure tensions excluded).

    Returns the joint torques that realize qddot at (q, qdot) against inertia,
    Coriolis/centrifugal and (optionally) gravity. The payload point mass is
    folded in at the tip. Python scalars throughout: this sits inside RK4.
    """
    n = model.n_joints
    gx, gy = model.gravity if with_gravity else (0.0, 0.0)
    phi = 0.0
    w = 0.0
    al = 0.0
    ax, ay = -gx, -gy            # base acceleration trick absorbs gravity
    ux = [0.0] * n
    uy = [0.0] * n
    acx = [0.0] * n
    acy = [0.0] * n
    apx = [0.0] * n              # acceleration of the distal joint of link i
    apy = [0.0] * n
    ws = [0.0] * n
    als = [0.0] * n
    for i in range(n):
        link = model.links[i]
        phi += q[i]
        w += qdot[i]
        al += qddot[i]
        c, s = math.cos(phi), math.sin(phi)
        ux[i], uy[i] = c, s
        ws[i], als[i] = w, al
        w2 = w * w
        acx[i] = ax + (-al * s - w2 * c) * link.com
        acy[i] = ay + (al * c - w2 * s) * link.com
        ax = ax + (-al * s - w2 * c) * link.length
        ay = ay + (al * c - w2 * s) * link.length
        apx[i], apy[i] = ax, ay
    fx = fy = tau_next = 0.0
    if model.tip_mass > 0.0:
        fx = model.tip_mass * apx[n - 1]
        fy = model.tip_mass * apy[n - 1]
    tau = [0.0] * n
    for i in range(n - 1, -1, -1):
        link = model.links[i]
        Fx = link.mass * acx[i]
        Fy = link.mass * acy[i]
        rcx, rcy = link.com * ux[i], link.com * uy[i]
        rlx, rly = link.length * ux[i], link.length * uy[i]
        t = (tau_next + link.inertia * als[i]
             + rcx * Fy - rcy * Fx
             + rlx * fy - rly * fx)
        fx += Fx
        fy += Fy
        tau_next = t
        tau[i] = t
    return tau


def mass_matrix(model: ArmModel, q: np.ndarray) -> np.ndarray:
    """Joint-space inertia matrix via unit-acceleration inverse dynamics."""
    n = model.n_joints
    ql = [float(v) for v in q]
    zeros = [0.0] * n
    H = np.empty((n, n))
    for j in range(n):
        e = [0.0] * n
        e[j] = 1.0
        H[:, j] = _rne(model, ql, zeros, e, with_gravity=False)
    return H


def bias_forces(model: ArmModel, q: np.ndarray, qdot: np.ndarray) -> np.ndarray:
    """Coriolis/centrifugal plus gravity torques, C(q, qdot) qdot + G(q)."""
    ql = [float(v) for v in q]
    qdl = [float(v) for v in qdot]
    return np.array(_rne(model, ql, qdl, [0.0] * model.n_joints, with_gravity=True))


def gravity_torques(model: ArmModel, q: np.ndarray) -> np.ndarray:
    ql = [float(v) for v in q]
    z = [0.0] * model.n_joints
    return np.array(_rne(model, ql, z, z, with_gravity=True))


def _accel(model: ArmModel, q: list[float], qd: list[float], tau: list[float],
           f_ext: tuple[float, float] | None) -> list[float]:
    """Joint accelerations; list-based hot path shared by the integrator."""
    n = model.n_joints
    zeros = [0.0] * n
    bias = _rne(model, q, qd, zeros, with_gravity=True)
    b = model.viscous_friction
    rhs = [tau[j] - bias[j] - b * qd[j] for j in range(n)]
    if f_ext is not None:
        fx, fy = f_ext
        phi = 0.0
        px = py = 0.0
        pxs = [0.0] * n
        pys = [0.0] * n
        for i in range(n):
            pxs[i], pys[i] = px, py
            phi += q[i]
            px += model.links[i].length * math.cos(phi)
            py += model.links[i].length * math.sin(phi)
        for j in range(n):
            rhs[j] += -(py - pys[j]) * fx + (px - pxs[j]) * fy
    cols = []
    for j in range(n):
        e = [0.0] * n
        e[j] = 1.0
        cols.append(_rne(model, q, zeros, e, with_gravity=False))
    if n == 1:
        return [rhs[0] / cols[0][0]]
    if n == 2:
        a, c = cols[0][0], cols[1][1]
        bb = cols[1][0]
        det = a * c - bb * bb
        return [(c * rhs[0] - bb * rhs[1]) / det,
                (a * rhs[1] - bb * rhs[0]) / det]
    H = np.array(cols).T
    return list(np.linalg.solve(H, np.array(rhs)))


def forward_dynamics(model: ArmModel, q: np.ndarray, qdot: np.ndarray,
                     tau: np.ndarray, f_ext: np.ndarray | None = None) -> np.ndarray:
    """qddot = H^-1 (tau + J^T f_ext - C qdot - G - b qdot)."""
    fe = None if f_ext is None else (float(f_ext[0]), float(f_ext[1]))
    return np.array(_accel(model, [float(v) for v in q], [float(v) for v in qdot],
                           [float(v) for v in tau], fe))


def total_energy(model: ArmModel, q: np.ndarray, qdot: np.ndarray) -> float:
    """Kinetic plus gravitational potential energy of the chain and payload."""
    gx, gy = model.gravity
    phi = 0.0
    w = 0.0
    px = py = 0.0
    vx = vy = 0.0
    e = 0.0
    for i, link in enumerate(model.links):
        phi += float(q[i])
        w += float(qdot[i])
        c, s = math.cos(phi), math.sin(phi)
        cx, cy = px + link.com * c, py + link.com * s
        vcx, vcy = vx - w * link.com * s, vy + w * link.com * c
        e += 0.5 * link.mass * (vcx * vcx + vcy * vcy) + 0.5 * link.inertia * w * w
        e -= link.mass * (gx * cx + gy * cy)
        px, py = px + link.length * c, py + link.length * s
        vx, vy = vx - w * link.length * s, vy + w * link.length * c
    if model.tip_mass > 0.0:
        e += 0.5 * model.tip_mass * (vx * vx + vy * vy)
        e -= model.tip_mass * (gx * px + gy * py)
    return e


def rest_state(model: ArmModel, q: np.ndarray | None = None) -> ArmState:
    """State at posture q with zero velocity, floor activation, slack tendons.

    Fiber lengths are set so each tendon sits exactly at its slack length.
    """
    q = np.array(model.q_ref, dtype=float) if q is None else np.asarray(q, dtype=float)
    lengths = muscle_lengths(model, q)
    states = []
    for i, mp in enumerate(model.muscles):
        l_fiber = (lengths[i] - mp.l_slack_tendon) / (mp.l0_fiber * mp.pennation_factor)
        if l_fiber <= 0.1:
            raise ValueError(f"muscle {i} has no room for its fiber at this posture")
        states.append(MuscleState(activation=mp.a_min, l_fiber_norm=float(l_fiber)))
    return ArmState(q=q, qdot=np.zeros(model.n_joints), muscle_states=states)


def integrate_step(model: ArmModel, state: ArmState, excitations: np.ndarray,
                   dt: float, f_ext: np.ndarray | None = None,
                   diag: MuscleDiagnostics | None = None) -> tuple[ArmState, StepInfo]:
    """Advance the coupled muscle/skeleton system by one tick.

    Muscles are stepped first at the entry posture; the resulting tendon
    forces are held constant while (q, qdot) advances by one RK4 step; hard
    joint stops then clamp q and zero any outward velocity component.
    """
    n = model.n_joints
    q0 = [float(v) for v in state.q]
    new_muscles = []
    forces = np.empty(model.n_muscles)
    tau = [0.0] * n
    for i, (mp, route) in enumerate(zip(model.muscles, model.routing)):
        l_mtu = route.l_ref - route.sign * route.moment_arm * (q0[route.joint]
                                                               - model.q_ref[route.joint])
        ms, f = step_muscle(state.muscle_states[i], float(excitations[i]),
                            l_mtu, dt, mp, diag)
        new_muscles.append(ms)
        forces[i] = f
        tau[route.joint] += route.sign * route.moment_arm * f

    fe = None if f_ext is None else (float(f_ext[0]), float(f_ext[1]))
    qd0 = [float(v) for v in state.qdot]
    half = 0.5 * dt
    k1v = _accel(model, q0, qd0, tau, fe)
    k2x = [qd0[j] + half * k1v[j] for j in range(n)]
    k2v = _accel(model, [q0[j] + half * qd0[j] for j in range(n)], k2x, tau, fe)
    k3x = [qd0[j] + half * k2v[j] for j in range(n)]
    k3v = _accel(model, [q0[j] + half * k2x[j] for j in range(n)], k3x, tau, fe)
    k4x = [qd0[j] + dt * k3v[j] for j in range(n)]
    k4v = _accel(model, [q0[j] + dt * k3x[j] for j in range(n)], k4x, tau, fe)
    sixth = dt / 6.0
    q_new = np.empty(n)
    qd_new = np.empty(n)
    stops = 0
    ok = True
    for j in range(n):
        qj = q0[j] + sixth * (qd0[j] + 2.0 * (k2x[j] + k3x[j]) + k4x[j])
        vj = qd0[j] + sixth * (k1v[j] + 2.0 * (k2v[j] + k3v[j]) + k4v[j])
        lo, hi = model.joint_limits[j]
        if qj < lo:
            qj = lo
            if vj < 0.0:
                vj = 0.0
            stops += 1
        elif qj > hi:
            qj = hi
            if vj > 0.0:
                vj = 0.0
            stops += 1
        if not (math.isfinite(qj) and math.isfinite(vj)):
            ok = False
        q_new[j] = qj
        qd_new[j] = vj

    if not ok:
        raise IntegrationDivergedError("non-finite joint state", state)

    return ArmState(q_new, qd_new, new_muscles), StepInfo(forces, np.array(tau), stops)
