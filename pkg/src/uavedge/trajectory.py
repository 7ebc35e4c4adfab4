"""UAV position planning by successive convex approximation.

Link rates are convex in the squared horizontal distance, so the tangent at
the previous iterate is a global lower bound on the rate and its reciprocal
a convex upper bound on airtime. Each outer iteration minimizes that
surrogate (plus exact quadratic flight cost and linear penalties for the
linearized safety and deadline constraints) with a projected gradient
descent over the per-slot reachability disks, then re-anchors. Candidate
iterates are accepted only if the true objective does not increase and true
pairwise safety holds, so feasibility and monotone descent are guaranteed
by construction rather than by the surrogate alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .scenario import SystemParams

LOG2E = math.log2(math.e)

MAX_OUTER = 20
MAX_INNER = 60
OUTER_REL_TOL = 1e-4
TRUST_FRACTION = 0.5
PENALTY_ESCALATIONS = 3


@dataclass
class ScaIterate:
    """One accepted outer iterate: positions plus both objective readings."""

    positions: np.ndarray
    surrogate_objective: float
    true_objective: float
    iteration: int


def _snr_coeff(tx_power: float, params: SystemParams, bandwidth: float) -> float:
    # SNR at squared distance phi and altitude gap A is c / (A^2 + phi)
    return tx_power * params.gamma0 / (params.noise_psd * bandwidth)


def _rate_of_phi(phi, alt_diff: float, bandwidth: float, c):
    a2 = alt_diff * alt_diff
    return bandwidth * np.log2(1.0 + c / (a2 + np.asarray(phi, dtype=float)))


def _rate_grad_of_phi(phi, alt_diff: float, bandwidth: float, c):
    a2 = alt_diff * alt_diff
    denom = (a2 + phi) * (a2 + phi + c)
    return -bandwidth * c * LOG2E / denom


def rate_lower_bound(
    anchor_pos,
    eval_pos,
    peer_pos,
    alt_diff: float,
    bandwidth: float,
    tx_power: float,
    params: SystemParams,
):
    """Tangent lower bound on the link rate, expanded in squared distance.

    Exact at ``eval_pos == anchor_pos`` and a global lower bound elsewhere
    because the rate is convex in the squared horizontal distance. May go
    negative far from the anchor; callers must reject such evaluations.
    """
    anchor_pos = np.asarray(anchor_pos, dtype=float)
    eval_pos = np.asarray(eval_pos, dtype=float)
    peer_pos = np.asarray(peer_pos, dtype=float)
    phi_a = float(np.sum((anchor_pos - peer_pos) ** 2))
    phi = float(np.sum((eval_pos - peer_pos) ** 2))
    c = _snr_coeff(tx_power, params, bandwidth)
    r_a = _rate_of_phi(phi_a, alt_diff, bandwidth, c)
    g_a = _rate_grad_of_phi(phi_a, alt_diff, bandwidth, c)
    return float(r_a + g_a * (phi - phi_a))


def safety_lower_bound(pos_u, pos_u2, anchor_u, anchor_u2) -> float:
    """Affine lower bound on the squared separation of two UAVs.

    Tangent of the convex squared norm at the anchor displacement: exact at
    the anchors, never above the true squared distance. Coincident anchors
    degenerate to zero.
    """
    e = np.asarray(pos_u, dtype=float) - np.asarray(pos_u2, dtype=float)
    e_a = np.asarray(anchor_u, dtype=float) - np.asarray(anchor_u2, dtype=float)
    return float(2.0 * np.dot(e_a, e) - np.dot(e_a, e_a))


@dataclass
class LuavTrajectoryProblem:
    """Frozen per-slot context for the joint L-UAV position solve.

    Task rows cover relayed (non-direct) tasks only. ``comp_tail`` is the
    position-independent compute delay of a task (both tiers); the relay
    leg is re-evaluated live from ``relay_bits`` because it moves with the
    UAV. ``deadline`` carries any slot-level relaxation already applied.
    """

    prev_positions: np.ndarray      # (U, 2)
    max_speed: np.ndarray           # (U,)
    masses: np.ndarray              # (U,)
    queues: np.ndarray              # (U,)
    p_u: np.ndarray                 # (U,)
    veh_xy: np.ndarray              # (T, 2)
    bits: np.ndarray                # (T,)
    tx_power: np.ndarray            # (T,)
    uav_idx: np.ndarray             # (T,)
    deadline: np.ndarray            # (T,)
    comp_tail: np.ndarray           # (T,)
    relay_bits: np.ndarray          # (T,)
    huav_pos: np.ndarray            # (2,)
    k: float
    params: SystemParams


@dataclass
class HuavTrajectoryProblem:
    """Frozen per-slot context for the H-UAV position solve.

    Relay loads are aggregated per L-UAV; per-task rows only feed the
    deadline constraint. Direct-offload tasks enter the acceptance guard
    (their uplink delay moves with the H-UAV) but not the block objective.
    """

    prev_position: np.ndarray       # (2,)
    max_speed: float
    luav_xy: np.ndarray             # (U, 2)
    queues: np.ndarray              # (U,)
    p_u: np.ndarray                 # (U,)
    relay_load_bits: np.ndarray     # (U,)
    task_uav_idx: np.ndarray        # (T,)
    task_relay_bits: np.ndarray     # (T,)
    task_head: np.ndarray           # (T,) uplink + both compute delays
    task_deadline: np.ndarray       # (T,)
    direct_veh_xy: np.ndarray       # (Td, 2)
    direct_bits: np.ndarray         # (Td,)
    direct_tx_power: np.ndarray     # (Td,)
    direct_head: np.ndarray         # (Td,) H-tier compute delay
    direct_deadline: np.ndarray     # (Td,)
    k: float
    params: SystemParams


def _project_disk(x: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    d = x - center
    norm = float(np.linalg.norm(d))
    if norm <= radius or norm == 0.0:
        return x
    return center + d * (radius / norm)


def _pgd(x0: np.ndarray, fun, grad, project, scale: float) -> np.ndarray:
    """Projected gradient descent with backtracking on the projection arc."""
    x = project(x0.copy())
    f_x = fun(x)
    if not np.isfinite(f_x):
        return x
    t = 1.0
    first = True
    for _ in range(MAX_INNER):
        g = grad(x)
        g_norm = float(np.linalg.norm(g))
        if g_norm <= 1e-18:
            break
        if first:
            t = 0.25 * scale / g_norm
            first = False
        moved = False
        for _ in range(30):
            cand = project(x - t * g)
            step = cand - x
            step_norm = float(np.linalg.norm(step))
            if step_norm <= 1e-12 * max(scale, 1.0):
                break
            f_c = fun(cand)
            if np.isfinite(f_c) and f_c <= f_x - 1e-4 * step_norm * step_norm / t:
                x, f_x = cand, f_c
                moved = True
                break
            t *= 0.5
        if not moved:
            break
        t *= 2.0
        if step_norm <= 1e-9 * max(scale, 1.0):
            break
    return x


class _LuavSurrogate:
    """Surrogate objective/gradient for one outer iteration, fixed anchors."""

    def __init__(self, prob: LuavTrajectoryProblem, anchors: np.ndarray,
                 penalty: float):
        p = prob.params
        self.prob = prob
        self.anchors = anchors
        self.penalty = penalty
        self.c_v = _snr_coeff(1.0, p, p.bw_v2lu) * prob.tx_power
        phi_a = np.sum((anchors[prob.uav_idx] - prob.veh_xy) ** 2, axis=1)
        self.phi_a = phi_a
        self.r_a = _rate_of_phi(phi_a, p.h1_m, p.bw_v2lu, self.c_v)
        self.g_a = _rate_grad_of_phi(phi_a, p.h1_m, p.bw_v2lu, self.c_v)
        # relay leg of the deadline tail, frozen at the anchor positions
        phi_uh = np.sum((anchors - prob.huav_pos) ** 2, axis=1)
        c_u = _snr_coeff(1.0, p, p.bw_lu2hu) * prob.p_u
        r_uh = _rate_of_phi(phi_uh, p.h2_m - p.h1_m, p.bw_lu2hu, c_u)
        self.tail = prob.comp_tail + prob.relay_bits / r_uh[prob.uav_idx]
        self.flight_w = prob.queues * prob.masses / (2.0 * p.slot_s)
        n = len(prob.prev_positions)
        self.pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]

    def rhat(self, x: np.ndarray) -> np.ndarray:
        phi = np.sum((x[self.prob.uav_idx] - self.prob.veh_xy) ** 2, axis=1)
        return self.r_a + self.g_a * (phi - self.phi_a)

    def value(self, x: np.ndarray, with_penalty: bool = True) -> float:
        prob = self.prob
        rhat = self.rhat(x)
        if np.any(rhat <= 0.0):
            return np.inf
        t_up = prob.bits / rhat
        val = prob.k * float(t_up.sum())
        val += float(np.dot(self.flight_w, np.sum((x - prob.prev_positions) ** 2, axis=1)))
        if not with_penalty:
            return val
        d_safe_sq = prob.params.d_safe_m ** 2
        for u, v in self.pairs:
            gap = d_safe_sq - safety_lower_bound(x[u], x[v], self.anchors[u], self.anchors[v])
            if gap > 0.0:
                val += self.penalty * gap / d_safe_sq
        over = t_up + self.tail - prob.deadline
        val += self.penalty * float(np.sum(np.maximum(over, 0.0)))
        return val

    def grad(self, x: np.ndarray) -> np.ndarray:
        prob = self.prob
        rhat = self.rhat(x)
        rhat = np.maximum(rhat, 1e-6)  # gradient only queried at finite points
        t_up = prob.bits / rhat
        over = t_up + self.tail - prob.deadline
        w_task = prob.k + self.penalty * (over > 0.0)
        # d(bits/rhat)/dphi = -bits * g_a / rhat^2 ; dphi/dx_u = 2 (x_u - veh)
        dphi_coef = -w_task * prob.bits * self.g_a / rhat ** 2
        g = np.zeros_like(x)
        contrib = 2.0 * dphi_coef[:, None] * (x[prob.uav_idx] - prob.veh_xy)
        np.add.at(g, prob.uav_idx, contrib)
        g += 2.0 * self.flight_w[:, None] * (x - prob.prev_positions)
        d_safe_sq = prob.params.d_safe_m ** 2
        for u, v in self.pairs:
            e_a = self.anchors[u] - self.anchors[v]
            gap = d_safe_sq - safety_lower_bound(x[u], x[v], self.anchors[u], self.anchors[v])
            if gap > 0.0:
                g[u] += self.penalty * (-2.0 * e_a) / d_safe_sq
                g[v] += self.penalty * (2.0 * e_a) / d_safe_sq
        return g


def _luav_true_rates(prob: LuavTrajectoryProblem, x: np.ndarray):
    p = prob.params
    c_v = _snr_coeff(1.0, p, p.bw_v2lu) * prob.tx_power
    phi = np.sum((x[prob.uav_idx] - prob.veh_xy) ** 2, axis=1)
    r_up = _rate_of_phi(phi, p.h1_m, p.bw_v2lu, c_v)
    c_u = _snr_coeff(1.0, p, p.bw_lu2hu) * prob.p_u
    phi_uh = np.sum((x - prob.huav_pos) ** 2, axis=1)
    r_uh = _rate_of_phi(phi_uh, p.h2_m - p.h1_m, p.bw_lu2hu, c_u)
    return r_up, r_uh


def _luav_true_objective(prob: LuavTrajectoryProblem, x: np.ndarray) -> float:
    """Block objective: weighted uplink airtime plus flight energy."""
    r_up, _ = _luav_true_rates(prob, x)
    flight = prob.masses / (2.0 * prob.params.slot_s) * np.sum(
        (x - prob.prev_positions) ** 2, axis=1
    )
    return prob.k * float(np.sum(prob.bits / r_up)) + float(np.dot(prob.queues, flight))


def _luav_slot_terms(prob: LuavTrajectoryProblem, x: np.ndarray) -> float:
    """All slot-objective terms that move with the L-UAV positions."""
    r_up, r_uh = _luav_true_rates(prob, x)
    t_relay = prob.relay_bits / r_uh[prob.uav_idx]
    coef = prob.k + prob.queues[prob.uav_idx] * prob.p_u[prob.uav_idx]
    flight = prob.masses / (2.0 * prob.params.slot_s) * np.sum(
        (x - prob.prev_positions) ** 2, axis=1
    )
    return (
        prob.k * float(np.sum(prob.bits / r_up))
        + float(np.sum(coef * t_relay))
        + float(np.dot(prob.queues, flight))
    )


def _safety_ok(x: np.ndarray, d_safe: float) -> bool:
    n = len(x)
    for u in range(n):
        for v in range(u + 1, n):
            if float(np.linalg.norm(x[u] - x[v])) < d_safe * (1.0 - 1e-12):
                return False
    return True


def _luav_deadline_violators(prob: LuavTrajectoryProblem, x: np.ndarray) -> np.ndarray:
    r_up, r_uh = _luav_true_rates(prob, x)
    total = prob.bits / r_up + prob.comp_tail + prob.relay_bits / r_uh[prob.uav_idx]
    bad = total > prob.deadline * (1.0 + 1e-9)
    return np.unique(prob.uav_idx[bad]) if np.any(bad) else np.zeros(0, dtype=int)


def solve_luav_positions(
    prob: LuavTrajectoryProblem,
) -> tuple[np.ndarray, list[ScaIterate]]:
    """Plan all L-UAV positions for one slot.

    Outer iterations re-anchor the rate surrogates at the last accepted
    ensemble; the inner solve is a projected gradient descent over each
    UAV's reachability disk (intersected with the area box and a trust disk
    that keeps the surrogate valid, relaxed once at convergence). A
    candidate is accepted only if true pairwise safety holds and neither
    the block objective nor the slot-coupled terms increase. UAVs whose
    served tasks would miss deadlines at the final point fall back to
    hovering, which is always feasible.
    """
    params = prob.params
    prev = np.asarray(prob.prev_positions, dtype=float)
    n = len(prev)
    radius = np.asarray(prob.max_speed, dtype=float) * params.slot_s

    if len(prob.bits) == 0:
        # nothing to chase: hovering is optimal for the flight-only objective
        return prev.copy(), [ScaIterate(prev.copy(), 0.0, 0.0, 0)]

    x = prev.copy()
    true_prev = _luav_true_objective(prob, x)
    slot_prev = _luav_slot_terms(prob, x)
    penalty = 1e3 * max(prob.k, 1.0)
    escalations = 0
    trace = [ScaIterate(x.copy(), true_prev, true_prev, 0)]

    def project_factory(anchors: np.ndarray, trust_scale: float):
        def project(y: np.ndarray) -> np.ndarray:
            out = np.clip(y, 0.0, params.area_m)
            for u in range(n):
                out[u] = _project_disk(out[u], anchors[u], trust_scale * radius[u])
                out[u] = _project_disk(out[u], prev[u], radius[u])
            return out
        return project

    full_trust_used = False
    it = 0
    while it < MAX_OUTER:
        it += 1
        trust = 1.0 if full_trust_used else TRUST_FRACTION
        anchors = x.copy()
        surrogate = _LuavSurrogate(prob, anchors, penalty)
        project = project_factory(anchors, trust)
        cand = _pgd(
            x.copy(),
            lambda y: surrogate.value(y),
            lambda y: surrogate.grad(y),
            project,
            scale=float(np.max(radius)) if n else 1.0,
        )

        accepted = None
        shrink = 1.0
        for _ in range(8):
            xc = anchors + shrink * (cand - anchors)
            tol = 1e-12 * max(1.0, abs(true_prev))
            if _safety_ok(xc, params.d_safe_m):
                t_obj = _luav_true_objective(prob, xc)
                s_obj = _luav_slot_terms(prob, xc)
                if t_obj <= true_prev + tol and s_obj <= slot_prev + tol:
                    accepted = (xc, t_obj, s_obj)
                    break
            shrink *= 0.5

        if accepted is None:
            break
        x, true_new, slot_new = accepted

        lin_viol = False
        d_safe_sq = params.d_safe_m ** 2
        for u in range(n):
            for v in range(u + 1, n):
                if safety_lower_bound(x[u], x[v], anchors[u], anchors[v]) < d_safe_sq * (1 - 1e-9):
                    lin_viol = True
        if len(_luav_deadline_violators(prob, x)) > 0:
            lin_viol = True
        if lin_viol and escalations < PENALTY_ESCALATIONS:
            penalty *= 10.0
            escalations += 1

        improved = true_prev - true_new
        true_prev, slot_prev = true_new, slot_new
        trace.append(ScaIterate(x.copy(), surrogate.value(x, with_penalty=False),
                                true_new, it))
        if improved < OUTER_REL_TOL * max(abs(true_prev), 1e-12):
            if full_trust_used:
                break
            full_trust_used = True

    violators = _luav_deadline_violators(prob, x)
    if len(violators) > 0:
        x = x.copy()
        x[violators] = prev[violators]
        if not _safety_ok(x, params.d_safe_m):
            x = prev.copy()
    # snap sub-micrometer projection dust so hovering is exactly free
    still = np.linalg.norm(x - prev, axis=1) < 1e-6
    x[still] = prev[still]
    return x, trace


class _HuavSurrogate:
    def __init__(self, prob: HuavTrajectoryProblem, anchor: np.ndarray, penalty: float):
        p = prob.params
        self.prob = prob
        self.anchor = anchor
        self.penalty = penalty
        self.c_u = _snr_coeff(1.0, p, p.bw_lu2hu) * prob.p_u
        phi_a = np.sum((prob.luav_xy - anchor) ** 2, axis=1)
        self.phi_a = phi_a
        alt = p.h2_m - p.h1_m
        self.r_a = _rate_of_phi(phi_a, alt, p.bw_lu2hu, self.c_u)
        self.g_a = _rate_grad_of_phi(phi_a, alt, p.bw_lu2hu, self.c_u)
        self.coef = prob.k + prob.queues * prob.p_u

    def rhat(self, x: np.ndarray) -> np.ndarray:
        phi = np.sum((self.prob.luav_xy - x) ** 2, axis=1)
        return self.r_a + self.g_a * (phi - self.phi_a)

    def value(self, x: np.ndarray, with_penalty: bool = True) -> float:
        prob = self.prob
        rhat = self.rhat(x)
        active = prob.relay_load_bits > 0.0
        if np.any(rhat[active] <= 0.0):
            return np.inf
        safe_r = np.where(rhat > 0.0, rhat, 1.0)
        val = float(np.sum(self.coef * np.where(active, prob.relay_load_bits / safe_r, 0.0)))
        if not with_penalty:
            return val
        t_relay = np.where(
            prob.task_relay_bits > 0.0,
            prob.task_relay_bits / np.maximum(rhat[prob.task_uav_idx], 1e-9),
            0.0,
        )
        over = prob.task_head + t_relay - prob.task_deadline
        if np.any(rhat[prob.task_uav_idx[prob.task_relay_bits > 0.0]] <= 0.0):
            return np.inf
        val += self.penalty * float(np.sum(np.maximum(over, 0.0)))
        return val

    def grad(self, x: np.ndarray) -> np.ndarray:
        prob = self.prob
        rhat = np.maximum(self.rhat(x), 1e-6)
        w_u = self.coef * np.where(prob.relay_load_bits > 0.0, prob.relay_load_bits, 0.0)
        t_relay = prob.task_relay_bits / rhat[prob.task_uav_idx]
        over = prob.task_head + t_relay - prob.task_deadline
        pen_u = np.zeros(len(prob.luav_xy))
        np.add.at(
            pen_u, prob.task_uav_idx,
            self.penalty * (over > 0.0) * prob.task_relay_bits,
        )
        dphi_coef = -(w_u + pen_u) * self.g_a / rhat ** 2
        # phi = |l_u - x|^2 so dphi/dx = -2 (l_u - x)
        return np.sum(-2.0 * dphi_coef[:, None] * (prob.luav_xy - x), axis=0)


def _huav_rates(prob: HuavTrajectoryProblem, x: np.ndarray) -> np.ndarray:
    p = prob.params
    c_u = _snr_coeff(1.0, p, p.bw_lu2hu) * prob.p_u
    phi = np.sum((prob.luav_xy - x) ** 2, axis=1)
    return _rate_of_phi(phi, p.h2_m - p.h1_m, p.bw_lu2hu, c_u)


def _huav_true_objective(prob: HuavTrajectoryProblem, x: np.ndarray) -> float:
    rates = _huav_rates(prob, x)
    coef = prob.k + prob.queues * prob.p_u
    loads = np.where(prob.relay_load_bits > 0.0, prob.relay_load_bits / rates, 0.0)
    return float(np.sum(coef * loads))


def _huav_slot_terms(prob: HuavTrajectoryProblem, x: np.ndarray) -> float:
    """Block objective plus the direct-uplink delays that move with it."""
    val = _huav_true_objective(prob, x)
    if len(prob.direct_bits) > 0:
        p = prob.params
        c_d = _snr_coeff(1.0, p, p.bw_v2hu) * prob.direct_tx_power
        phi = np.sum((prob.direct_veh_xy - x) ** 2, axis=1)
        rates = _rate_of_phi(phi, p.h2_m, p.bw_v2hu, c_d)
        val += prob.k * float(np.sum(prob.direct_bits / rates))
    return val


def _huav_deadline_ok(prob: HuavTrajectoryProblem, x: np.ndarray) -> bool:
    rates = _huav_rates(prob, x)
    t_relay = np.where(
        prob.task_relay_bits > 0.0,
        prob.task_relay_bits / rates[prob.task_uav_idx],
        0.0,
    )
    if np.any(prob.task_head + t_relay > prob.task_deadline * (1.0 + 1e-9)):
        return False
    if len(prob.direct_bits) > 0:
        p = prob.params
        c_d = _snr_coeff(1.0, p, p.bw_v2hu) * prob.direct_tx_power
        phi = np.sum((prob.direct_veh_xy - x) ** 2, axis=1)
        t_up = prob.direct_bits / _rate_of_phi(phi, p.h2_m, p.bw_v2hu, c_d)
        if np.any(t_up + prob.direct_head > prob.direct_deadline * (1.0 + 1e-9)):
            return False
    return True


def solve_huav_position(
    prob: HuavTrajectoryProblem,
) -> tuple[np.ndarray, list[ScaIterate]]:
    """Plan the H-UAV position for one slot; same scheme in two variables.

    With no relayed load the objective is identically zero and the UAV
    hovers. Deadline breaches at the returned point (relayed or direct
    paths) trigger the hover fallback, which preserves feasibility.
    """
    params = prob.params
    prev = np.asarray(prob.prev_position, dtype=float)
    radius = prob.max_speed * params.slot_s

    if float(np.sum(prob.relay_load_bits)) <= 0.0:
        return prev.copy(), [ScaIterate(prev.copy(), 0.0, 0.0, 0)]

    x = prev.copy()
    true_prev = _huav_true_objective(prob, x)
    slot_prev = _huav_slot_terms(prob, x)
    penalty = 1e3 * max(prob.k, 1.0)
    escalations = 0
    trace = [ScaIterate(x.copy(), true_prev, true_prev, 0)]

    full_trust_used = False
    it = 0
    while it < MAX_OUTER:
        it += 1
        trust = 1.0 if full_trust_used else TRUST_FRACTION
        anchor = x.copy()
        surrogate = _HuavSurrogate(prob, anchor, penalty)

        def project(y: np.ndarray) -> np.ndarray:
            out = np.clip(y, 0.0, params.area_m)
            out = _project_disk(out, anchor, trust * radius)
            return _project_disk(out, prev, radius)

        cand = _pgd(
            x.copy(),
            lambda y: surrogate.value(y),
            lambda y: surrogate.grad(y),
            project,
            scale=radius,
        )

        accepted = None
        shrink = 1.0
        for _ in range(8):
            xc = anchor + shrink * (cand - anchor)
            tol = 1e-12 * max(1.0, abs(true_prev))
            t_obj = _huav_true_objective(prob, xc)
            s_obj = _huav_slot_terms(prob, xc)
            if t_obj <= true_prev + tol and s_obj <= slot_prev + tol:
                accepted = (xc, t_obj, s_obj)
                break
            shrink *= 0.5
        if accepted is None:
            break
        x, true_new, slot_new = accepted

        if not _huav_deadline_ok(prob, x) and escalations < PENALTY_ESCALATIONS:
            penalty *= 10.0
            escalations += 1

        improved = true_prev - true_new
        true_prev, slot_prev = true_new, slot_new
        trace.append(ScaIterate(x.copy(), surrogate.value(x, with_penalty=False),
                                true_new, it))
        if improved < OUTER_REL_TOL * max(abs(true_prev), 1e-12):
            if full_trust_used:
                break
            full_trust_used = True

    if not _huav_deadline_ok(prob, x):
        x = prev.copy()
    if float(np.linalg.norm(x - prev)) < 1e-6:
        x = prev.copy()
    return x, trace
