"""Joint task-split and CPU allocation by alternating convex block solves.

Given a fixed matching and fixed UAV positions, the remaining per-slot
problem couples the per-task split ratio ``alpha`` (fraction computed on the
L-UAV, remainder relayed on) with per-task CPU shares on both server tiers.
With alpha fixed the problem is convex and separable per server up to one
capacity constraint each, so the L-UAV blocks are solved by dual bisection
on the capacity multiplier (per-task stationary points via a safeguarded
Newton solve) and the H-UAV block by water-filling with deadline floors.
With CPU shares fixed the objective is affine per task in alpha, so each
alpha snaps to an endpoint of its feasible interval. Alternating the two
yields a monotonically improving solution.

Deadlines enter each block as per-task frequency lower bounds. When a slot
cannot meet its deadlines at all, they are relaxed by the smallest uniform
factor that restores feasibility and the solution is flagged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_BIG = 1e30
_NEWTON_ITERS = 40
_BISECT_ITERS = 48


class InfeasibleError(Exception):
    """A block solve cannot satisfy its constraints; carries the violations."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


@dataclass
class AllocationProblem:
    """Per-slot allocation inputs with positions and matching frozen.

    Task arrays are aligned; ``uav_idx`` maps each task to its L-UAV.
    ``t_tx`` and ``relay_rate`` are the vehicle uplink delay and the
    assigned UAV's relay rate at the frozen positions.
    """

    bits: np.ndarray
    cycles: np.ndarray          # bits * density
    deadline: np.ndarray
    uav_idx: np.ndarray
    t_tx: np.ndarray
    relay_rate: np.ndarray
    f_u_cap: np.ndarray         # per L-UAV clock capacity, Hz
    kappa: np.ndarray
    p_u: np.ndarray
    queues: np.ndarray
    f_h_cap: float
    k: float

    @property
    def n_tasks(self) -> int:
        return len(self.bits)

    @property
    def n_uavs(self) -> int:
        return len(self.f_u_cap)


@dataclass
class ResourceSolution:
    alpha: np.ndarray
    f_lu: np.ndarray
    f_h: np.ndarray
    objective: float
    feasible: bool
    iterations: int
    relax_factor: float = 1.0


def _stationary_f(k: float, q: float, kappa: float, w: np.ndarray,
                  lam: float) -> np.ndarray:
    """Per-task stationary clock speeds for one L-UAV at multiplier lam.

    Solves 2*q*kappa*w*f^3 + lam*f^2 - k*w = 0 for its unique positive
    root (the objective k*w/f + q*kappa*w*f^2 is convex with this
    stationarity condition). Entries with w == 0 return 0.
    """
    w = np.asarray(w, dtype=float)
    f = np.zeros_like(w)
    pos = w > 0.0
    if not np.any(pos):
        return f
    a = 2.0 * q * kappa * w[pos]
    c = k * w[pos]

    if q <= 0.0 and lam <= 0.0:
        f[pos] = np.inf
        return f
    if q <= 0.0:
        f[pos] = np.sqrt(c / lam)
        return f

    ub = (k / (2.0 * q * kappa)) ** (1.0 / 3.0)
    start = np.full(a.shape, ub)
    if lam > 0.0:
        start = np.minimum(start, np.sqrt(c / lam))
    x = start
    for _ in range(_NEWTON_ITERS):
        p = a * x ** 3 + lam * x ** 2 - c
        dp = 3.0 * a * x ** 2 + 2.0 * lam * x
        step = np.where(dp > 0.0, p / np.where(dp > 0.0, dp, 1.0), 0.0)
        x = np.maximum(x - step, 0.0)
        if np.all(np.abs(p) <= 1e-13 * c):
            break
    f[pos] = x
    return f


def _luav_block(k: float, q: float, kappa: float, w: np.ndarray, lo: np.ndarray,
                cap: float) -> np.ndarray:
    """Optimal clock shares on one L-UAV under its capacity and floors."""
    w = np.asarray(w, dtype=float)
    lo = np.asarray(lo, dtype=float)
    if float(lo.sum()) > cap * (1.0 + 1e-12):
        raise InfeasibleError(
            [f"L-UAV deadline floors need {lo.sum():.4g} Hz of {cap:.4g} Hz"]
        )
    if k <= 0.0:
        # pure energy objective increases with f: sit on the floors
        return lo.copy()

    def clipped(lam: float) -> np.ndarray:
        return np.clip(_stationary_f(k, q, kappa, w, lam), lo, cap)

    f = clipped(0.0)
    if float(f.sum()) <= cap * (1.0 + 1e-12):
        return np.minimum(f, cap)

    lam_hi = 1.0
    for _ in range(200):
        if float(clipped(lam_hi).sum()) <= cap:
            break
        lam_hi *= 8.0
    lam_lo = 0.0
    for _ in range(_BISECT_ITERS):
        lam_mid = 0.5 * (lam_lo + lam_hi)
        if float(clipped(lam_mid).sum()) > cap:
            lam_lo = lam_mid
        else:
            lam_hi = lam_mid
        if lam_hi - lam_lo <= 1e-13 * lam_hi:
            break
    f = clipped(lam_hi)
    # land exactly on the capacity by scaling the free (unclamped) shares
    free = (f > lo * (1.0 + 1e-12)) & (w > 0.0)
    slack = cap - float(f.sum())
    if np.any(free) and slack > 0.0:
        f[free] += slack * f[free] / float(f[free].sum())
    return np.minimum(f, cap)


def _h_block(k: float, w: np.ndarray, lo: np.ndarray, cap: float) -> np.ndarray:
    """Water-filling clock shares on the H-UAV with deadline floors."""
    w = np.asarray(w, dtype=float)
    lo = np.asarray(lo, dtype=float)
    if float(lo.sum()) > cap * (1.0 + 1e-12):
        raise InfeasibleError(
            [f"H-UAV deadline floors need {lo.sum():.4g} Hz of {cap:.4g} Hz"]
        )
    pos = w > 0.0
    if k <= 0.0 or not np.any(pos):
        return lo.copy()

    def filled(mu: float) -> np.ndarray:
        f = lo.copy()
        f[pos] = np.maximum(lo[pos], np.sqrt(k * w[pos] / mu))
        return f

    mu_lo = mu_hi = 1.0
    for _ in range(200):
        if float(filled(mu_hi).sum()) <= cap or mu_hi > 1e200:
            break
        mu_hi *= 8.0
    for _ in range(200):
        if float(filled(mu_lo).sum()) >= cap or mu_lo < 1e-200:
            break
        mu_lo /= 8.0
    for _ in range(_BISECT_ITERS):
        mu_mid = math.sqrt(mu_lo) * math.sqrt(mu_hi)
        if float(filled(mu_mid).sum()) > cap:
            mu_lo = mu_mid
        else:
            mu_hi = mu_mid
        if mu_hi - mu_lo <= 1e-13 * mu_hi:
            break
    f = filled(mu_hi)
    free = (f > lo * (1.0 + 1e-12)) & pos
    slack = cap - float(f.sum())
    if np.any(free) and slack > 0.0:
        f[free] += slack * f[free] / float(f[free].sum())
    return f


def solve_f_given_alpha(
    alpha: np.ndarray,
    prob: AllocationProblem,
    deadline: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Optimal CPU shares on both tiers for a fixed task split.

    The L-UAV floors use the loosest deadline decomposition (H tier at full
    clock); the H-UAV floors are then exact given the chosen L shares. If
    the H tier cannot honor those floors, the L blocks are re-solved once
    against fair-share H clocks before declaring the slot infeasible.
    """
    alpha = np.asarray(alpha, dtype=float)
    deadline = prob.deadline if deadline is None else np.asarray(deadline, dtype=float)
    v = prob.n_tasks
    if v == 0:
        return np.zeros(0), np.zeros(0)

    w_l = alpha * prob.cycles
    w_h = (1.0 - alpha) * prob.cycles
    t_relay = prob.bits * (1.0 - alpha) / prob.relay_rate

    w_h_total = float(w_h.sum())
    fair_share = np.where(
        w_h > 0.0, prob.f_h_cap * w_h / max(w_h_total, 1e-300), prob.f_h_cap
    )

    violations: list[str] = []
    for h_est in (np.full(v, prob.f_h_cap), fair_share):
        slack_l = deadline - prob.t_tx - t_relay - np.where(
            h_est > 0.0, w_h / np.maximum(h_est, 1e-300), 0.0
        )
        bad = (w_l > 0.0) & (slack_l <= 0.0)
        if np.any(bad):
            violations = [
                f"task {i}: no time left for L-tier compute (slack {slack_l[i]:.4g} s)"
                for i in np.nonzero(bad)[0]
            ]
            continue
        lo_l = np.where(w_l > 0.0, w_l / np.maximum(slack_l, 1e-300), 0.0)

        f_lu = np.zeros(v)
        try:
            for u in range(prob.n_uavs):
                sel = prob.uav_idx == u
                if not np.any(sel):
                    continue
                f_lu[sel] = _luav_block(
                    prob.k, prob.queues[u], prob.kappa[u], w_l[sel], lo_l[sel],
                    prob.f_u_cap[u],
                )
        except InfeasibleError as err:
            violations = err.violations
            continue

        t_l_comp = np.where(w_l > 0.0, w_l / np.maximum(f_lu, 1e-300), 0.0)
        slack_h = deadline - prob.t_tx - t_relay - t_l_comp
        bad = (w_h > 0.0) & (slack_h <= 0.0)
        if np.any(bad):
            violations = [
                f"task {i}: no time left for H-tier compute (slack {slack_h[i]:.4g} s)"
                for i in np.nonzero(bad)[0]
            ]
            continue
        lo_h = np.where(w_h > 0.0, w_h / np.maximum(slack_h, 1e-300), 0.0)
        try:
            f_h = _h_block(prob.k, w_h, lo_h, prob.f_h_cap)
        except InfeasibleError as err:
            violations = err.violations
            continue
        return f_lu, f_h

    raise InfeasibleError(violations or ["CPU allocation infeasible"])


def alpha_interval(
    f_lu: np.ndarray,
    f_h: np.ndarray,
    prob: AllocationProblem,
    deadline: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Feasible split interval per task from the affine deadline constraint."""
    deadline = prob.deadline if deadline is None else np.asarray(deadline, dtype=float)
    inv_flu = np.where(f_lu > 0.0, 1.0 / np.maximum(f_lu, 1e-300), _BIG)
    inv_fh = np.where(f_h > 0.0, 1.0 / np.maximum(f_h, 1e-300), _BIG)
    t_relay_full = prob.bits / prob.relay_rate

    # total delay is (a * alpha + base); the constraint is affine in alpha
    a = prob.cycles * inv_flu - t_relay_full - prob.cycles * inv_fh
    base = prob.t_tx + t_relay_full + prob.cycles * inv_fh
    budget = deadline - base

    lo = np.zeros(prob.n_tasks)
    hi = np.ones(prob.n_tasks)
    scale = np.maximum(np.abs(a), 1.0)
    grows = a > 1e-15 * scale
    shrinks = a < -1e-15 * scale
    flat = ~(grows | shrinks)

    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(np.abs(a) > 0.0, budget / np.where(a == 0.0, 1.0, a), 0.0)
    hi[grows] = np.minimum(1.0, ratio[grows])
    lo[shrinks] = np.maximum(0.0, ratio[shrinks])

    bad = (flat & (budget < -1e-12)) | (lo > hi + 1e-12)
    if np.any(bad):
        raise InfeasibleError(
            [f"task {i}: empty feasible split interval" for i in np.nonzero(bad)[0]]
        )
    return lo, np.maximum(hi, lo)


def solve_alpha_given_f(
    f_lu: np.ndarray,
    f_h: np.ndarray,
    prob: AllocationProblem,
    deadline: np.ndarray | None = None,
) -> np.ndarray:
    """Optimal task splits for fixed CPU shares.

    Each task's objective is affine in its split with coefficient
    K*(C/f_lu - 1/R - C/f_h)*D-ish terms plus the queue-weighted energy
    slope, so the optimum sits at an interval endpoint: the upper end when
    the coefficient is negative, the lower end otherwise (ties included).
    """
    f_lu = np.asarray(f_lu, dtype=float)
    f_h = np.asarray(f_h, dtype=float)
    lo, hi = alpha_interval(f_lu, f_h, prob, deadline)

    inv_flu = np.where(f_lu > 0.0, 1.0 / np.maximum(f_lu, 1e-300), _BIG)
    inv_fh = np.where(f_h > 0.0, 1.0 / np.maximum(f_h, 1e-300), _BIG)
    q_v = prob.queues[prob.uav_idx]
    kappa_v = prob.kappa[prob.uav_idx]
    p_v = prob.p_u[prob.uav_idx]
    t_relay_full = prob.bits / prob.relay_rate

    coeff = (
        prob.k * prob.cycles * inv_flu
        - prob.k * t_relay_full
        - prob.k * prob.cycles * inv_fh
        + q_v * kappa_v * prob.cycles * f_lu ** 2
        - q_v * p_v * t_relay_full
    )
    return np.where(coeff < 0.0, hi, lo)


def allocation_objective(alpha: np.ndarray, f_lu: np.ndarray, f_h: np.ndarray,
                 prob: AllocationProblem) -> float:
    """Delay-plus-weighted-energy value of an allocation (flight excluded)."""
    w_l = alpha * prob.cycles
    w_h = (1.0 - alpha) * prob.cycles
    t_relay = prob.bits * (1.0 - alpha) / prob.relay_rate
    t_l = np.where(w_l > 0.0, w_l / np.maximum(f_lu, 1e-300), 0.0)
    t_h = np.where(w_h > 0.0, w_h / np.maximum(f_h, 1e-300), 0.0)

    kappa_v = prob.kappa[prob.uav_idx]
    p_v = prob.p_u[prob.uav_idx]
    e_u = kappa_v * w_l * f_lu ** 2 + p_v * t_relay
    delay = float(np.sum(t_l + t_relay + t_h))
    energy = float(np.sum(prob.queues[prob.uav_idx] * e_u))
    return prob.k * delay + energy


def _even_split(prob: AllocationProblem) -> tuple[np.ndarray, np.ndarray]:
    loads = np.bincount(prob.uav_idx, minlength=prob.n_uavs)
    f_lu = prob.f_u_cap[prob.uav_idx] / np.maximum(loads[prob.uav_idx], 1)
    f_h = np.full(prob.n_tasks, prob.f_h_cap / max(prob.n_tasks, 1))
    return f_lu, f_h


def _alternate(prob: AllocationProblem, deadline: np.ndarray,
               initial_alpha: np.ndarray | None, max_rounds: int,
               rel_tol: float) -> tuple[np.ndarray, np.ndarray, np.ndarray, float, int]:
    if initial_alpha is None:
        f_lu, f_h = _even_split(prob)
        lo, hi = alpha_interval(f_lu, f_h, prob, deadline)
        alpha = np.clip(0.5, lo, hi)
    else:
        # warm start: trust the caller's split, the first block solve validates it
        f_lu, f_h = _even_split(prob)
        alpha = np.asarray(initial_alpha, dtype=float)

    obj_prev = np.inf
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        try:
            f_lu_new, f_h_new = solve_f_given_alpha(alpha, prob, deadline)
            alpha_new = solve_alpha_given_f(f_lu_new, f_h_new, prob, deadline)
        except InfeasibleError:
            if np.isfinite(obj_prev):
                break  # a later round painted itself in; keep the good iterate
            raise
        obj = allocation_objective(alpha_new, f_lu_new, f_h_new, prob)
        if obj > obj_prev + 1e-9 * max(1.0, abs(obj_prev)):
            break  # keep the previous, better iterate
        alpha, f_lu, f_h = alpha_new, f_lu_new, f_h_new
        if obj_prev - obj < rel_tol * max(abs(obj_prev), 1e-12):
            obj_prev = obj
            break
        obj_prev = obj
    if not np.isfinite(obj_prev):
        obj_prev = allocation_objective(alpha, f_lu, f_h, prob)
    return alpha, f_lu, f_h, float(obj_prev), rounds


def alternate_allocation(
    prob: AllocationProblem,
    initial_alpha: np.ndarray | None = None,
    max_rounds: int = 30,
    rel_tol: float = 1e-6,
    relax_hint: float | None = None,
) -> ResourceSolution:
    """Alternate the two block solves until the objective stalls.

    An infeasible slot is repaired by scaling all deadlines up by the
    smallest factor (bisected to ~0.1%) that restores feasibility; the
    returned solution is then flagged infeasible with ``relax_factor`` set.
    ``relax_hint`` (a previous slot or iteration's factor) seeds the
    bracket so repeated repairs stay cheap.
    """
    if prob.n_tasks == 0:
        return ResourceSolution(np.zeros(0), np.zeros(0), np.zeros(0), 0.0, True, 0)

    starts = [initial_alpha, None] if initial_alpha is not None else [None]
    for start in starts:
        try:
            alpha, f_lu, f_h, obj, rounds = _alternate(
                prob, prob.deadline, start, max_rounds, rel_tol
            )
            return ResourceSolution(alpha, f_lu, f_h, obj, True, rounds)
        except InfeasibleError:
            continue

    def feasible_at(rho: float) -> bool:
        try:
            _alternate(prob, prob.deadline * rho, None, 1, rel_tol)
            return True
        except InfeasibleError:
            return False

    rho_hi = relax_hint if relax_hint is not None and relax_hint > 1.0 else 2.0
    for _ in range(60):
        if feasible_at(rho_hi):
            break
        rho_hi *= 2.0
    else:
        raise InfeasibleError(["slot unservable at any deadline relaxation"])

    rho_lo = 1.0
    for _ in range(14):
        rho_mid = 0.5 * (rho_lo + rho_hi)
        if rho_hi - rho_lo <= 1e-3 * rho_hi:
            break
        if feasible_at(rho_mid):
            rho_hi = rho_mid
        else:
            rho_lo = rho_mid

    for _ in range(8):
        try:
            alpha, f_lu, f_h, obj, rounds = _alternate(
                prob, prob.deadline * rho_hi, None, max_rounds, rel_tol
            )
            return ResourceSolution(alpha, f_lu, f_h, obj, False, rounds, rho_hi)
        except InfeasibleError:
            rho_hi *= 1.05
    raise InfeasibleError(["deadline relaxation failed to converge"])
