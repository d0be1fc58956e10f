"""Monitoring a few temporal-logic requirements on simulated traces.

Run: python3 demos/01_monitoring.py
"""

import numpy as np

from driverbound.sim import InputSignal, initial_state, simulate
from driverbound.stl import parse, robustness, robustness_signal, satisfies, to_string

# A car 120 m from a green light, cruising at 20 m/s and easing off a little.
x0 = initial_state(120.0, 20.0, "G", t_el=10.0)
u = InputSignal(0.5, [0.0, 0.0, -1.0, -1.0, -0.5, 0.0])
trace = simulate(x0, u, horizon=3.0)
print("samples:", len(trace), " final speed: %.2f m/s" % trace["v_x"][-1])

# Speed limit over the whole trace.  Robustness is the margin, in m/s.
limit = parse("alw_[0,inf] (v_x < 25.5)")
print(to_string(limit), "->", robustness(limit, trace))

# The same requirement with a free parameter, checked at several values.
speed = parse("param nu; alw_[0,inf] (v_x < nu)")
for nu in (18, 19.5, 20, 21):
    print("  nu = %5.1f  satisfied: %s" % (nu, satisfies(speed, trace, 0, {"nu": nu})))

# Pointwise robustness of the body shows where the margin is smallest.
body = robustness_signal(parse("v_x < 20.5"), trace)
print("tightest sample:", int(np.argmin(body)), "margin %.3f" % body.min())

# Coasting into a red light at 14 m/s breaks the "slow near red" requirement.
red = parse("alw_[0,inf] ((s_TL == R) and (d_x < 19.5) and (t_el > 7.5) => (v_x < 10))")
coast = simulate(initial_state(25.0, 14.0, "R", t_el=7.0), InputSignal(0.5, [0.0] * 6), 3.0)
print("red requirement robustness while coasting:", robustness(red, coast))
