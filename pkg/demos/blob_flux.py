"""A short plasma-blob run and its wall fluxes.

Electrons and ions start with the same Gaussian density.  The electrons
are 20 times faster, reach the walls first and charge the plasma
positively, which builds the sheath field that holds the rest back until
the ions catch up.  The run writes flux.csv, run.log and config.txt to the
output directory and prints a coarse flux table.

    python demos/blob_flux.py [t_final] [limiter] [out_dir]

The default t_final of 100 takes a minute or two at desk resolution; use
1000 with `solkin run --preset blob-desk` for the full desk-scale run.
"""

import sys

import numpy as np

from solkin.config import resolve
from solkin.simulation import run

t_final = float(sys.argv[1]) if len(sys.argv) > 1 else 100.0
limiter = sys.argv[2] if len(sys.argv) > 2 else "sldg"
out_dir = sys.argv[3] if len(sys.argv) > 3 else "blob_demo_out"

cfg = resolve("blob-desk", overrides={"t_final": t_final, "limiter": limiter})
result = run(cfg, out_dir)
f = result.flux
print(f"status {result.status}, {result.state.step} steps in {result.wall_time:.1f} s, "
      f"{len(result.events)} velocity-domain shrinks")
print(f"{'t':>8s} {'electron flux':>14s} {'ion flux':>12s} {'E energy':>12s} {'vmax_e':>8s}")
for i in np.linspace(0, len(f["t"]) - 1, 11).astype(int):
    print(f"{f['t'][i]:8.1f} {f['je_plus'][i]:14.4e} {f['ji_plus'][i]:12.4e} "
          f"{f['E_energy'][i]:12.4e} {f['vmax_e'][i]:8.3f}")
lost = f["mass_e"][0] - f["mass_e"][-1]
print(f"electron mass lost {lost:.4e} ({100 * lost / f['mass_e'][0]:.2f} %)")
