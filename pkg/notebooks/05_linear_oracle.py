# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Hand-set weights that encode the equation of motion
#
# For a uniform chain the acceleration is a linear map of the aggregated
# state and the force: a = -(c/m) A v - (k/m) A u + E/m. Those three
# coefficients can be written straight into the MLP, with each ReLU pair
# passing the signal through unchanged.
#
# The surrogate sees the state at step n while the implicit solver balances
# forces at step n + 1. The one-step lag shows up as a rollout error that
# only closes as the time step shrinks.

# %%
from gdtm.graph import build_chain_adjacency
from gdtm.oracle import ExcitationSpec, SolverConfig, generate_excitation, newmark_solve, uniform_chain
from gdtm.surrogate import build_dataset, evaluate_rollout, fit_scalers, linear_oracle_surrogate, predict_samples, rollout

system = uniform_chain(10)
adj = build_chain_adjacency(10)
spec = ExcitationSpec("harmonic", 4, 500.0, frequency=1.5)

for dt in (0.01, 0.005, 0.002, 0.001, 0.0005):
    cfg = SolverConfig(dt=dt, steps=int(round(5.0 / dt)))
    truth = newmark_solve(system, generate_excitation(spec, cfg, 10), cfg)
    scalers = fit_scalers([truth])
    model = linear_oracle_surrogate(2000.0, 2.4e5, 2500.0, scalers, dt)
    one_step = predict_samples(model, build_dataset([truth], adj, scalers)) * scalers.acceleration
    lag = abs(one_step - truth.acceleration[1:]).max()
    print(f"dt {dt:7.4f}:  rollout NMSE {evaluate_rollout(rollout(model, adj, truth.excitation), truth).nmse:.3e}"
          f"   largest one-step error {lag:.3e} m/s^2")
