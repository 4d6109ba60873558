"""Continuous-time walks behind theta: descending ladder legs of B, last passages of the conditioned R.

Both walks jump at rate 1/2 with the step law.  A ladder quadruple is one
i.i.d. increment (T, U, Vb, Vr): T is the time the blue walk needs to reach a new
strict minimum H below its previous one, and (U, Vr) is drawn from an
independent unconditioned walk run until it first climbs to H, which has the
law of the last passage of the red walk (conditioned positive) at height H.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _core
from .exact_laws import harmonic_h
from .samplers import RngStream, default_tables

INF = math.inf


@dataclass(frozen=True)
class DownLeg:
    T: float
    H: int
    L: int
    Vb: int
    censored: bool


@dataclass(frozen=True)
class LadderQuadruple:
    T: float
    U: float
    Vb: int
    Vr: int
    H: int


@dataclass(frozen=True)
class LambdaRecord:
    lam: int
    T_sum: float
    U_sum: float
    V_sum: int


def _cum():
    return default_tables().cumulative


def sample_unconditioned_leg_T(rng: RngStream, t_cap: float = INF) -> DownLeg:
    """First passage of the blue walk below 0, with height H, crossing jump size L and volume."""
    t, h, ln, vb, cens = _core.leg_down(rng.generator, _cum(), float(t_cap))
    return DownLeg(T=float(t), H=int(h), L=int(ln), Vb=int(vb), censored=bool(cens))


def sample_leg_U_given_H(rng: RngStream, H: int, t_cap: float = INF) -> tuple[float, int]:
    """Duration and volume of a walk from 0 until it first reaches H (censored at t_cap)."""
    if H < 1:
        raise ValueError("H must be >= 1")
    u, vr, cens = _core.leg_up(rng.generator, _cum(), int(H), float(t_cap))
    if cens:
        return math.nan, int(vr)
    return float(u), int(vr)


def sample_quadruple(rng: RngStream) -> LadderQuadruple:
    leg = sample_unconditioned_leg_T(rng)
    u, vr = sample_leg_U_given_H(rng, leg.H)
    return LadderQuadruple(T=leg.T, U=u, Vb=leg.Vb, Vr=vr, H=leg.H)


@dataclass
class QuadrupleBatch:
    """Column arrays for a batch of quadruples.

    When a leg exceeds ``t_cap`` both T and U of that quadruple are replaced
    by t_cap plus independent unit exponentials and ``censored`` is set; the
    replacement keeps the pair exchangeable and atomless.
    """

    T: np.ndarray
    U: np.ndarray
    H: np.ndarray
    Vb: np.ndarray
    Vr: np.ndarray
    L: np.ndarray
    censored: np.ndarray
    t_cap: float

    def __len__(self):
        return self.T.shape[0]


def sample_quadruples(rng: RngStream, count: int, t_cap: float = 1e5) -> QuadrupleBatch:
    out = np.empty((int(count), 7))
    _core.quadruple_block(rng.generator, _cum(), int(count), float(t_cap), out)
    return QuadrupleBatch(T=out[:, 0].copy(), U=out[:, 1].copy(), H=out[:, 2].astype(np.int64),
                          Vb=out[:, 3].astype(np.int64), Vr=out[:, 4].astype(np.int64),
                          L=out[:, 5].astype(np.int64), censored=out[:, 6] > 0, t_cap=float(t_cap))


def lambda_of(T: np.ndarray, U: np.ndarray) -> np.ndarray:
    """First index k (1-based) with cumsum(T)_k < cumsum(U)_k along the last axis; 0 if none."""
    below = np.cumsum(T, axis=-1) < np.cumsum(U, axis=-1)
    first = np.argmax(below, axis=-1) + 1
    return np.where(below.any(axis=-1), first, 0)


def run_lambda(rng: RngStream, k_cap: int, t_cap: float = 1e5) -> LambdaRecord | None:
    """Draw quadruples until the cumulative T falls below the cumulative U; None if k_cap is reached."""
    if k_cap < 1:
        raise ValueError("k_cap must be >= 1")
    t_sum = u_sum = 0.0
    v_sum = 0
    for k in range(1, k_cap + 1):
        q = sample_quadruples(rng, 1, t_cap)
        t_sum += q.T[0]
        u_sum += q.U[0]
        v_sum += int(q.Vb[0] + q.Vr[0])
        if t_sum < u_sum:
            return LambdaRecord(lam=k, T_sum=t_sum, U_sum=u_sum, V_sum=v_sum)
    return None


# ---------------------------------------------------------------------------
# the red walk conditioned to stay positive


def stop_level(H: int, eps: float) -> int:
    """Smallest L with h(H + 1) / h(L) <= eps."""
    target = harmonic_h(H + 1) / eps
    lo = H + 1
    hi = max(lo, int((target * target) + 2))
    while harmonic_h(hi) < target:
        hi *= 2
    while lo < hi:
        mid = (lo + hi) // 2
        if harmonic_h(mid) >= target:
            hi = mid
        else:
            lo = mid + 1
    return lo


@dataclass
class ConditionedPath:
    times: np.ndarray
    levels: np.ndarray
    volumes: np.ndarray
    start: int


def simulate_conditioned_R(rng: RngStream, r0: int, t_cap: float, max_events: int = 10 ** 7) -> ConditionedPath:
    """Path of the red walk conditioned positive, from r0 up to time t_cap."""
    if r0 < 1:
        raise ValueError("r0 must be >= 1")
    cap = int(min(max_events, 4 * t_cap + 1000)) if math.isfinite(t_cap) else int(max_events)
    times = np.empty(cap)
    levels = np.empty(cap, np.int64)
    vols = np.empty(cap, np.int64)
    n = _core.conditioned_r_path(rng.generator, _cum(), int(r0), float(t_cap), cap, times, levels, vols)
    return ConditionedPath(times=times[:n], levels=levels[:n], volumes=vols[:n], start=int(r0))


def conditioned_last_passage(rng: RngStream, H: int, eps: float = 1e-6,
                             max_events: int = 10 ** 9) -> tuple[float, int]:
    """(U, Vr) at height H from a direct run of the conditioned red walk from 1.

    The run stops once the walk reaches the level where a later return to H has
    probability at most ``eps``.
    """
    if H < 1:
        raise ValueError("H must be >= 1")
    L = stop_level(H, eps)
    u, v, ok = _core.conditioned_r_last_passage(rng.generator, _cum(), int(H), int(L), int(max_events))
    if not ok:
        raise RuntimeError("conditioned walk did not reach the stop level")
    return float(u), int(v)


# ---------------------------------------------------------------------------
# the joint picture


@dataclass
class JointOutcome:
    theta_hat: float
    T: np.ndarray
    U: np.ndarray
    H: np.ndarray
    checked: int
    flagged: bool
    inclusions_ok: bool
    violations: list


def joint_two_walk_theta(rng: RngStream, max_events: int = 200_000, eps: float = 0.05) -> JointOutcome:
    """Simulate red (conditioned, from 1) and blue (from 0) together and test the coding of theta.

    Ladder times T_i and heights H_i come from the blue walk.  The last passage
    U_i of red at H_i counts as determined once red has climbed to the stop
    level for (H_i, eps) after its last exit from H_i.  A path is flagged if red
    ever came back to H_i after having reached that level.  The four inclusions
    linking (T_i, U_i) to theta and to the volumes are checked for every n whose
    U_1..U_n are determined.
    """
    out = np.empty((int(max_events), 5))
    _core.joint_path(rng.generator, _cum(), int(max_events), out)
    t = out[:, 0]
    r = out[:, 1].astype(np.int64)
    b = out[:, 2].astype(np.int64)
    vol = out[:, 3].astype(np.int64)
    eta = out[:, 4].astype(np.int64)
    v_red = np.cumsum(vol * eta)
    v_all = np.cumsum(vol)

    run_min = np.minimum.accumulate(np.minimum(b, 0))
    hit = np.nonzero(r + run_min <= 0)[0]
    theta_idx = int(hit[0]) if hit.size else -1
    theta_hat = float(t[theta_idx]) if theta_idx >= 0 else INF

    prev_min = np.concatenate(([0], run_min[:-1]))
    ladder_idx = np.nonzero(b < prev_min)[0]
    T = t[ladder_idx]
    H = -b[ladder_idx]

    r_prev = np.concatenate(([1], r[:-1]))
    # running max of r from each index to the end
    suffix_max = np.maximum.accumulate(r[::-1])[::-1]
    U = np.full(len(H), np.nan)
    U_idx = np.full(len(H), -1)
    flagged = False
    cache = {}
    for i, h in enumerate(H):
        h = int(h)
        if h not in cache:
            exits = np.nonzero((r_prev == h) & (r == h + 1))[0]
            level = stop_level(h, eps)
            det = -1
            if exits.size:
                last = int(exits[-1])
                if suffix_max[last] >= level:
                    det = last
                # an earlier exit after which red reached the stop level and still came back
                for e in exits[:-1]:
                    nxt = exits[exits > e][0]
                    if r[e:nxt].max() >= level:
                        flagged = True
                        break
            cache[h] = det
        det = cache[h]
        if det >= 0:
            U[i] = t[det]
            U_idx[i] = det

    checked = 0
    violations = []
    for n in range(1, len(H) + 1):
        if not np.all(U_idx[:n] >= 0):
            break
        checked = n
        Tn, Un = T[n - 1], U[n - 1]
        if np.all(T[:n] > U[:n]):
            if not theta_hat > Tn:
                violations.append(("theta_after_T", n))
            if theta_idx >= 0:
                vr_before = v_red[theta_idx - 1] if theta_idx > 0 else 0
                if vr_before < v_red[U_idx[n - 1]]:
                    violations.append(("red_volume", n))
        if Tn < Un:
            if not theta_hat < Un:
                violations.append(("theta_before_U", n))
            elif v_all[theta_idx] > v_all[U_idx[n - 1]]:
                violations.append(("total_volume", n))
    return JointOutcome(theta_hat=theta_hat, T=T, U=U, H=H, checked=checked, flagged=flagged,
                        inclusions_ok=not violations, violations=violations)


def unreflected_walk(jumps: np.ndarray, etas: np.ndarray, r0: int, b0: int):
    """Rebuild (R, B) from the uncorrected coordinate walks plus the running minimum of blue.

    Returns (R, B, theta) where theta is the first index (1-based) with
    R + min(inf B, 0) <= 0, or 0 if it does not occur.
    """
    jumps = np.asarray(jumps, np.int64)
    etas = np.asarray(etas, np.int64)
    r_raw = r0 + np.cumsum(jumps * etas)
    b_raw = b0 + np.cumsum(jumps * (1 - etas))
    low = np.minimum(np.minimum.accumulate(b_raw), 0)
    R = r_raw + low
    B = b_raw - low
    dead = np.nonzero(R <= 0)[0]
    theta = int(dead[0]) + 1 if dead.size else 0
    return R, B, theta


def harris_check(rng: RngStream, walks: int = 10 ** 6, steps: int = 50, threshold: int = 5) -> dict:
    """Estimate P(A), P(B), P(A and B) for A = {S_steps >= 0}, B = {min S >= -threshold}."""
    out = np.empty((int(walks), 2), np.int8)
    _core.walk_block(rng.generator, _cum(), int(walks), int(steps), int(threshold), out)
    a = out[:, 0].astype(float)
    b = out[:, 1].astype(float)
    pa, pb = a.mean(), b.mean()
    pab = (a * b).mean()
    # delta-method standard error of pab - pa pb
    influence = a * b - pb * a - pa * b
    se = influence.std(ddof=1) / math.sqrt(len(a))
    return {"p_a": pa, "p_b": pb, "p_ab": pab, "diff": pab - pa * pb, "se": se,
            "walks": int(walks), "steps": int(steps), "threshold": int(threshold)}
