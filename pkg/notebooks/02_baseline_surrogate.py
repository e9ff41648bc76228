# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Training the homogeneous surrogate on the 10-DOF chain
#
# Thirty episodes (ten impulse, ten harmonic, ten random) at 100 Hz for
# 50 s. Whole episodes are split 8:2 within each excitation kind. Training
# takes a few minutes on one core; set `QUICK = True` for a smoke run.

# %%
from dataclasses import replace

import numpy as np

from gdtm.config import ExperimentConfig
from gdtm.experiments import build_system, generate_episodes, train_from_config
from gdtm.spectral import psd
from gdtm.surrogate import evaluate_rollout, evaluate_rollouts, rollout

QUICK = False
config = ExperimentConfig()
if QUICK:
    config = replace(config, solver=replace(config.solver, duration=5.0),
                     training=replace(config.training, epochs=5))

system, graph = build_system(config.system)
specs, records = generate_episodes(config, system)
model, history, split, adj = train_from_config(config, specs, records, graph)
print("best epoch", history.best_epoch, "of", history.epochs[-1])
print("test loss %.3e -> %.3e" % (history.test_loss[0], min(history.test_loss)))

# %% [markdown]
# Full autoregressive rollouts on the held-out episodes, driven only by the
# excitation.

# %%
pairs = [(rollout(model, adj, records[i].excitation), records[i]) for i in split.test]
for i, (pred, truth) in zip(split.test, pairs):
    r = evaluate_rollout(pred, truth)
    print(f"{specs[i].kind:9s} vertex {specs[i].target_vertex}:  NMSE {r.nmse:.3e}  PE {r.peak_error_pct:5.2f}%")
print("pooled:", evaluate_rollouts(pairs))

# %% [markdown]
# Frequency content of one predicted response against the truth.

# %%
pred, truth = pairs[-1]
f, p_true = psd(truth.acceleration[:, 0], 1 / truth.dt)
_, p_pred = psd(pred.acceleration[:, 0], 1 / truth.dt)
k = np.argmax(p_true)
print("dominant bin %.3f Hz: true %.3e, predicted %.3e" % (f[k], p_true[k], p_pred[k]))
