# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Reusing one checkpoint on other chains
#
# The MLP acts per vertex, so a model trained on ten masses runs on any
# chain length once the adjacency is rebuilt. Parameter changes are passed
# in by scaling the adjacency. CASE 1 stiffens nothing and adds mass, so the
# scaled adjacency covers K/M while the damping path stays off; CASE 2
# softens springs and dampers together.

# %%
import sys

from gdtm import checkpoint
from gdtm.config import ExperimentConfig
from gdtm.experiments import TRANSFER_HEADER, build_system, generate_episodes, train_from_config, transfer_table

config = ExperimentConfig()
if len(sys.argv) > 1 and sys.argv[1].endswith(".json"):
    model, _ = checkpoint.load(sys.argv[1])
else:
    system, graph = build_system(config.system)
    specs, records = generate_episodes(config, system)
    model, *_ = train_from_config(config, specs, records, graph)

# %%
print(TRANSFER_HEADER)
for row in transfer_table(model, config):
    print(row.csv_row())
