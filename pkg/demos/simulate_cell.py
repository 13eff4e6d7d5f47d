"""
Simulating the reduced-order cell model
=======================================

Build a drive-cycle-like current profile, run the low-fidelity model and look
at terminal voltage and surface concentrations.
"""

import numpy as np

from gastridge import DriveCycle, default_cell_parameters, random_walk, simulate_cycle
from gastridge.cycles import concatenate, constant_current

p = default_cell_parameters()
print(f"capacity {p.capacity_ah:.3f} Ah, open-circuit voltage {p.equilibrium_voltage():.4f} V")

# two random-walk segments with a 10 minute C/2 charge in between
walk_a = random_walk(1800, p.capacity_ah, seed=1)
walk_b = random_walk(1800, p.capacity_ah, seed=2)
cycle = concatenate([walk_a, walk_b], charge_amps=0.5 * p.capacity_ah, charge_duration=600)
trace = simulate_cycle(p, cycle)

print(f"{len(trace)} samples, V in [{trace.v_lfm.min():.3f}, {trace.v_lfm.max():.3f}] V")
print(f"final negative surface stoichiometry {trace.c_sn[-1] / p.negative.max_concentration:.3f}")

# a constant-current discharge: the voltage drops immediately by the ohmic
# part and then follows the open-circuit curves
cc = simulate_cycle(p, constant_current(p.capacity_ah, 1800))
for k in (0, 60, 600, 1799):
    print(f"t = {k:5d} s   V = {cc.v_lfm[k]:.4f} V   c_sn = {cc.c_sn[k]:8.1f} mol/m^3")

# surface concentration leads the bulk during a pulse and relaxes after it
pulse = np.r_[np.full(120, 2 * p.capacity_ah), np.zeros(600)]
tr = simulate_cycle(p, DriveCycle.from_current(pulse))
print(f"c_sn right after the pulse {tr.c_sn[120]:.1f}, after 10 min rest {tr.c_sn[-1]:.1f}")
