"""Compare single-qubit pulse windows on a filtered line.

Prints the infidelity of an Rx(pi/2) gate on qubit 1 for a few gate times
and windows, together with the first-order crosstalk rate predicted for the
unfiltered pulse.

Run with ``python3 demos/window_comparison.py``.
"""

import numpy as np

from spinshape import errframe as ef
from spinshape import exchange as ex
from spinshape import shaper
from spinshape import simulator as sim
from spinshape.qcore import GateTarget
from spinshape.sigchain import FilterSpec
from spinshape.windows import WindowSpec

params = sim.SystemParams(Ez=10.0, shift=ex.ZeemanShiftModel(0.1), J_res=6e-5)
config = sim.SimConfig(frame="rwa", dt=0.01, filter=FilterSpec(order=3, cutoff=0.15, enabled=True))
target = GateTarget.rx(np.pi / 2, 1)
windows = {"rect": WindowSpec.rect(), "hann": WindowSpec.hann(), "kaiser 5.8": WindowSpec.kaiser(5.8)}

print(f"{'t_g (ns)':>9} {'window':>11} {'1-F':>10} {'crosstalk rate':>15}")
for t_g in (18.0, 25.0, 33.0, 45.0):
    for name, w in windows.items():
        pulse = shaper.static_1q_pulse(w, t_g, np.pi / 2, params.Ez + params.dEz / 2)
        res = sim.run_noiseless(target, pulse, params, config)
        crosstalk = ef.channels_for("one_qubit", params, pulse)[1]
        print(f"{t_g:9.1f} {name:>11} {res.infidelity:10.2e} {ef.channel_error_rate(crosstalk):15.2e}")
