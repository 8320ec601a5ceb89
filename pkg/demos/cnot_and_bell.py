"""
CNOT truth table and Bell states
================================

The Förster phase gate, framed by Hadamard-like rotations on the target,
acts as a CNOT. Decay of the Rydberg levels is included throughout.
This script runs several full gate simulations and takes a minute or two.
"""

# %%
import numpy as np

from rydberg_arp.gates import DEFAULT_T2_CORRECTION, QubitRegister, bell_fidelities, cnot_sequence, distance_sweep, truth_table

register = QubitRegister.default(25.0)
cnot = truth_table(cnot_sequence(register=register), register=register)
print("CNOT truth table (rows: input 00, 01, 10, 11)")
print(np.round(cnot.truth_table, 4))
print(f"overlap with the ideal table: {cnot.overlap:.4f}")

# %%
for name, res in bell_fidelities(register).items():
    print(f"{name:10s} F={res.fidelity:.4f}  reconstructed F={res.fidelity_reconstructed:.4f}")

# %%
# Small changes of the separation barely move the fidelity.
for row in distance_sweep([24.85, 25.0, 25.15], t2_correction=DEFAULT_T2_CORRECTION):
    print(f"R={row.R:6.2f} um  overlap={row.overlap:.5f}  min Bell F={row.min_bell:.5f}")
