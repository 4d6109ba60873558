"""Follow one percolation peeling exploration step by step.

The boundary holds R red and B blue edges.  Each step either adds one edge
(coloured red or blue at random) or swallows a stretch of the boundary together
with a Boltzmann-distributed number of inner vertices.  The run ends when no red
edge is left: that step is theta.

Run: python demos/02_single_peeling_run.py [seed]
"""

import sys

from uipt_peel import RngStream, new_peeling, run_to_theta, step_peeling

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 2024
rng = RngStream(seed, 0)
state = new_peeling(1, 1)
print(f"seed {seed}: start with R = {state.R}, B = {state.B}")
print(f"{'step':>5} {'jump':>5} {'colour':>6} {'R':>4} {'B':>4} {'volume':>7}")
while not state.finished and state.step < 40:
    rec = step_peeling(state, rng)
    colour = "red" if rec.eta == 0 else "blue"
    print(f"{state.step:5d} {rec.jump:5d} {colour:>6} {state.R:4d} {state.B:4d} {state.V:7d}")
if state.finished:
    print(f"red boundary exhausted at theta = {state.step}; "
          f"last fully red boundary at step {state.last_all_red}")
else:
    print("still running after 40 steps; the compiled runner below finishes it")

# the compiled runner consumes the same stream, so it reproduces the run above
out = run_to_theta(1, 1, RngStream(seed, 0), step_cap=10 ** 6)
print(f"\ncompiled run: theta = {out.theta}, delta = {out.delta}, V_theta = {out.V_theta}, "
      f"V_red(theta - 1) = {out.V_red_theta_minus_1}, flags = {out.flags}")
if out.perimeter_lower_proxy is not None:
    print(f"perimeter lower proxy 1 + theta - delta = {out.perimeter_lower_proxy}")
