"""The peeling chain: boundary size S, red/blue counts (R, B), volumes and the time theta.

A step moves S by the h-transformed kernel, gives the move to red or blue with
a fair coin, reflects (R, B) back into the quadrant, and credits the swallowed
Boltzmann volume to the colour that moved.  theta is the first step with R = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _core
from .samplers import RngStream, default_tables

FLAG_THETA_CENSORED = _core.FLAG_THETA_CENSORED
FLAG_VTHETA_CENSORED = _core.FLAG_VTHETA_CENSORED
FLAG_VRED_CENSORED = _core.FLAG_VRED_CENSORED
FLAG_HARD_CAP = _core.FLAG_HARD_CAP

_NO_CAP = _core.VOLUME_CEILING - 1


class PeelingFinished(RuntimeError):
    """Raised when a finished run is stepped again."""


@dataclass
class PeelingState:
    S: int
    R: int
    B: int
    step: int = 0
    V_red: int = 0
    V_blue: int = 0
    last_all_red: int = 1
    volume_cap: int = _NO_CAP

    @property
    def V(self) -> int:
        return self.V_red + self.V_blue

    @property
    def finished(self) -> bool:
        return self.R == 0

    def check(self):
        assert self.S == self.R + self.B
        assert self.R >= 0 and self.B >= 0 and self.S >= 2


@dataclass(frozen=True)
class StepRecord:
    eta: int
    jump: int
    volume_added: int


@dataclass(frozen=True)
class PeelingOutcome:
    """Summary of one run.

    ``flags`` is a bit mask.  A set bit marks the corresponding value as a lower
    bound: 1 theta, 2 V_theta, 4 V_red_theta_minus_1.  Bit 8 marks runs stopped
    by the hard step ceiling.
    """

    theta: int
    flags: int
    delta: int
    V_theta: int
    V_red_theta_minus_1: int

    @property
    def censored(self) -> bool:
        return bool(self.flags & FLAG_THETA_CENSORED)

    @property
    def perimeter_lower_proxy(self) -> int | None:
        if self.censored:
            return None
        return self.theta - self.delta + 1


def reflect(r: int, b: int) -> tuple[int, int]:
    """Push a negative coordinate back to 0, charging the overshoot to the other colour."""
    return _core.reflect(int(r), int(b))


def apply_move(R: int, B: int, jump: int, eta: int) -> tuple[int, int]:
    """(R, B) after a boundary move of ``jump`` given to red (eta=1) or blue (eta=0)."""
    if eta:
        return reflect(R + jump, B)
    return reflect(R, B + jump)


def new_peeling(r0: int, b0: int, volume_cap: int | None = None) -> PeelingState:
    if r0 < 1:
        raise ValueError("need at least one red boundary vertex")
    if b0 < 0 or r0 + b0 < 2:
        raise ValueError("boundary must have size >= 2 with b0 >= 0")
    cap = _NO_CAP if volume_cap is None else int(volume_cap)
    return PeelingState(S=r0 + b0, R=r0, B=b0, last_all_red=1 if b0 > 0 else 0, volume_cap=cap)


def step_peeling(state: PeelingState, rng: RngStream) -> StepRecord:
    """Advance ``state`` by one peeling step in place."""
    if state.finished:
        raise PeelingFinished("the run already reached theta")
    s, r, b, eta, jump, vol, v_red, v_blue = _core.peel_step(
        rng.generator, default_tables().cumulative, state.S, state.R, state.B,
        state.V_red, state.V_blue, state.volume_cap)
    state.S, state.R, state.B = int(s), int(r), int(b)
    state.V_red, state.V_blue = int(v_red), int(v_blue)
    state.step += 1
    if state.R > 0 and state.B == 0:
        state.last_all_red = state.step
    return StepRecord(eta=int(eta), jump=int(jump), volume_added=int(vol))


def run_to_theta(r0: int, b0: int, rng: RngStream, step_cap: int,
                 volume_cap: int | None = None, *, extend: bool = False,
                 volume_stop: int | None = None, max_steps: int | None = None) -> PeelingOutcome:
    """Run a chain from (r0, b0) until theta or censoring.

    Without ``extend`` the run is censored after ``step_cap`` steps.  With
    ``extend`` a run alive at ``step_cap`` continues until theta or until its red
    volume exceeds ``volume_stop`` (default: ``volume_cap``), so that volume
    survival probabilities below that level are unbiased.  ``max_steps`` is a
    hard ceiling on the continuation.
    """
    new_peeling(r0, b0)
    if step_cap < 1:
        raise ValueError("step_cap must be >= 1")
    vcap = _NO_CAP if volume_cap is None else int(volume_cap)
    if vcap < 1:
        raise ValueError("volume_cap must be >= 1")
    vstop = vcap if volume_stop is None else min(int(volume_stop), vcap)
    hard = max(step_cap, 10 ** 9 if max_steps is None else int(max_steps))
    n, flags, delta, v_theta, v_red = _core.run_peeling(
        rng.generator, default_tables().cumulative, int(r0), int(b0), int(step_cap),
        vcap, bool(extend), vstop, hard)[:5]
    return PeelingOutcome(theta=int(n), flags=int(flags), delta=int(delta),
                          V_theta=int(v_theta), V_red_theta_minus_1=int(v_red))


def perimeter_bounds(outcome: PeelingOutcome) -> tuple[int, str]:
    """Pathwise lower bound 1 + theta - Delta on the hull perimeter."""
    if outcome.censored:
        raise ValueError("perimeter bounds need an uncensored run")
    return (outcome.theta - outcome.delta + 1,
            "at most 2 + theta + theta', theta' an independent copy of theta")


def peel_path(r0: int, b0: int, rng: RngStream, steps: int, volume_cap: int | None = None) -> np.ndarray:
    """Step-by-step record with columns (S, R, B, eta, jump, volume), stopping at theta."""
    new_peeling(r0, b0)
    vcap = _NO_CAP if volume_cap is None else int(volume_cap)
    out = np.zeros((int(steps), 6), np.int64)
    n = _core.peel_path(rng.generator, default_tables().cumulative, int(r0), int(b0), int(steps), vcap, out)
    return out[:n]


def delta_from_path(path: np.ndarray, b0: int) -> int:
    """Last step before theta with B = 0, or the start convention."""
    delta = 1 if b0 > 0 else 0
    alive = path[:, 1] > 0
    hits = np.nonzero(alive & (path[:, 2] == 0))[0]
    if hits.size:
        delta = int(hits[-1]) + 1
    return delta
