# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Ground-truth solver sanity checks
#
# A single 2000 kg mass on a 2.4e5 N/m spring rings at sqrt(k/m)/(2 pi).
# The implicit average-acceleration scheme keeps the energy of an undamped
# chain constant and lets dampers only remove energy.

# %%
import numpy as np

from gdtm.oracle import (
    ExcitationSpec, MdofSystem, SolverConfig, generate_excitation, newmark_solve,
    total_energy, uniform_chain,
)

cfg = SolverConfig(dt=0.01, steps=5000)
kick = generate_excitation(ExcitationSpec("impulse", 0, 1000.0), cfg, 1)
rec = newmark_solve(MdofSystem([2000.0], [2.4e5], [0.0]), kick, cfg)

spectrum = np.abs(np.fft.rfft(rec.displacement[:, 0]))
freqs = np.fft.rfftfreq(cfg.steps, cfg.dt)
print("FFT peak  %.4f Hz" % freqs[np.argmax(spectrum[1:]) + 1])
print("analytic  %.4f Hz" % (np.sqrt(2.4e5 / 2000.0) / (2 * np.pi)))

# %% [markdown]
# Energy of the 10-mass chain after a kick at the middle mass.

# %%
kick10 = generate_excitation(ExcitationSpec("impulse", 4, 1000.0), cfg, 10)
for damping in (0.0, 2500.0):
    system = uniform_chain(10, damping=damping)
    energy = total_energy(system, newmark_solve(system, kick10, cfg))
    print(f"c = {damping:6.0f}:  E(1) = {energy[1]:.4e} J,  E(end) = {energy[-1]:.4e} J,"
          f"  largest step increase = {np.diff(energy[1:]).max():.2e} J")
