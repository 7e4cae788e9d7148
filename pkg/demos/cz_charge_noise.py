"""Adiabatic CZ under 1/f charge noise.

Sweeps the gate time of a Hann-shaped CZ on a device with an exponential
exchange model and a voltage-dependent Zeeman difference, and prints the
noiseless and noise-averaged infidelity. Short gates lose to non-adiabatic
flips, long gates to accumulated dephasing.

Run with ``python3 demos/cz_charge_noise.py`` (a few seconds).
"""

from spinshape import exchange as ex
from spinshape import noise as nz
from spinshape import shaper
from spinshape import simulator as sim
from spinshape.qcore import GateTarget
from spinshape.sigchain import FilterSpec
from spinshape.windows import WindowSpec

model = ex.ExchangeModel.exponential(6e-5, 0.1)
shift = ex.ZeemanShiftModel(0.1, 3.3e-4)
params = sim.SystemParams(Ez=10.0, shift=shift, exchange=model)
noise = nz.NoiseSpec(charge_amp=0.035, seed=7)
config = sim.SimConfig(frame="rwa", filter=FilterSpec(order=3, cutoff=0.15, enabled=True), noise=noise,
                       realizations=100)

print(f"{'t_g (ns)':>9} {'noiseless':>10} {'noisy':>10} {'stderr':>9}")
for t_g in (20.0, 40.0, 60.0, 100.0, 200.0):
    pulse = shaper.cz_pulse(WindowSpec.hann(), t_g, model, shift)
    res = sim.run_ensemble(GateTarget.cz(), pulse, params, config)
    clean = 1.0 - res.metadata["noiseless_fidelity"]
    print(f"{t_g:9.1f} {clean:10.2e} {res.infidelity:10.2e} {res.stderr:9.1e}")
