"""
Absorber strength and solver choice
===================================

Two knobs decide whether CATM works: the absorber amplitude ``V0``, which
sets how well the eigenvector remembers the initial state, and the solver,
which decides how strong a field can be handled.
"""

import numpy as np

from catm.driver import default_config, run_catm
from catm.errors import ConvergenceError

cfg = default_config()
basis = cfg.basis()

########################################################################
# Residue against V0
# ------------------
# The unwanted weight at ``t = 0`` falls roughly exponentially with the
# absorber amplitude.

print("   V0      residue   iterations")
for v0 in np.arange(1, 11) * 0.05:
    res = run_catm(cfg.with_updates(absorber={"amplitude": float(v0)}), basis)
    print(f"{v0:5.2f}   {res.epsilon:9.2e}   {res.iterations:5d}")

########################################################################
# RDWA and Krylov over the field amplitude
# ----------------------------------------
# Plain RDWA stops converging once the field couples the states too
# strongly; the Krylov variant keeps going.

print("\n   E0     RDWA    Krylov")
for e0 in (0.02, 0.05, 0.1, 0.15, 0.2, 0.3):
    cells = []
    for method in ("rdwa", "krylov"):
        point = cfg.with_updates(pulse={"amplitude": e0}, solver={"method": method})
        try:
            cells.append(f"{run_catm(point, basis).iterations:5d}")
        except ConvergenceError:
            cells.append("    -")
    print(f"{e0:5.2f}   {cells[0]}   {cells[1]}")
