"""End-to-end numerical study: dataset generation, training, and transfer."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig, SystemSection
from .graph import (
    HETEROGENEOUS, AdjacencySet, Graph, build_heterogeneous_adjacency, chain_graph,
    homogeneous_adjacency, scale_edges, spring_scale_matrix,
)
from .metrics import MetricReport
from .oracle import (
    HARMONIC, IMPULSE, ExcitationSpec, MdofSystem, generate_excitation, newmark_solve,
    scaled_system,
)
from .surrogate import SurrogateModel, evaluate_rollouts, fit_surrogate, rollout

CASE_LABELS = {0: "CASE 0", 1: "CASE 1", 2: "CASE 2", 3: "CASE 3"}


def spring_type_list(section: SystemSection, dof: int | None = None) -> list[int]:
    dof = section.dof if dof is None else dof
    n = dof if section.grounded else dof - 1
    return [section.spring_types[s % len(section.spring_types)] for s in range(n)]


def build_system(section: SystemSection, dof: int | None = None) -> tuple[MdofSystem, Graph]:
    """Chain system and matching graph; spring types index the per-type values."""
    dof = section.dof if dof is None else dof
    types = spring_type_list(section, dof)
    k = np.array([section.stiffness[t] for t in types])
    c = np.array([section.damping[t] for t in types])
    system = MdofSystem(np.full(dof, section.mass), k, c, section.grounded)
    return system, chain_graph(dof, section.grounded, types)


def adjacency_for(model_kind: str, graph: Graph, gat_layout: str = "auto") -> AdjacencySet:
    if model_kind == "heterogeneous":
        return build_heterogeneous_adjacency(graph)
    if model_kind == "gat":
        layout = gat_layout
        if layout == "auto":
            layout = HETEROGENEOUS if len(graph.type_labels) > 1 else "homogeneous"
        if layout == HETEROGENEOUS:
            return build_heterogeneous_adjacency(graph)
    return homogeneous_adjacency(graph)


def adjacency_for_model(model: SurrogateModel, graph: Graph) -> AdjacencySet:
    if model.layout_kind == HETEROGENEOUS:
        return build_heterogeneous_adjacency(graph)
    return homogeneous_adjacency(graph)


def excitation_specs(config: ExperimentConfig, n_vertices: int, seed=None, count=None):
    """Seeded single-vertex excitation specs, grouped by kind.

    Each episode draws from its own child of a ``SeedSequence``, so the list
    does not depend on generation order.
    """
    ex = config.excitation
    seed = ex.seed if seed is None else seed
    count = ex.count if count is None else count
    children = np.random.SeedSequence(seed).spawn(len(ex.kinds) * count)
    specs = []
    for n, child in enumerate(children):
        kind = ex.kinds[n // count]
        rng = np.random.default_rng(child)
        target = int(rng.integers(n_vertices))
        freq = float(rng.uniform(ex.harmonic_freq_min, ex.harmonic_freq_max))
        noise_seed = int(rng.integers(2**63))
        if kind == IMPULSE:
            spec = ExcitationSpec(kind, target, ex.impulse_amplitude,
                                  duration_steps=ex.impulse_duration)
        elif kind == HARMONIC:
            spec = ExcitationSpec(kind, target, ex.harmonic_amplitude, frequency=freq)
        else:
            spec = ExcitationSpec(kind, target, ex.random_sigma, seed=noise_seed)
        specs.append(spec)
    return specs


def _pool_map(func, items, workers):
    """Ordered map; ``workers > 1`` fans out to a thread pool."""
    if workers is None or workers <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def generate_episodes(config: ExperimentConfig, system: MdofSystem | None = None, seed=None,
                      count=None, duration=None, workers=1):
    """Return ``(specs, records)`` simulated with the Newmark oracle.

    Output order follows the excitation list regardless of ``workers``.
    """
    if system is None:
        system, _ = build_system(config.system)
    solver = config.solver.solver_config(duration)
    specs = excitation_specs(config, system.vertex_count, seed, count)

    def solve(spec):
        return newmark_solve(system, generate_excitation(spec, solver, system.vertex_count), solver)

    return specs, _pool_map(solve, specs, workers)


def train_from_config(config: ExperimentConfig, specs, records, graph: Graph):
    adj = adjacency_for(config.model.kind, graph, config.model.gat_layout)
    model, history, split = fit_surrogate(
        records, adj, config.model.kind, config.training, strata=[s.kind for s in specs],
        hidden=config.model.hidden, gat_hidden=config.model.gat_hidden,
        beta=config.solver.beta, gamma=config.solver.gamma)
    return model, history, split, adj


def case_variant(case: int, system: MdofSystem, adj: AdjacencySet, seed=0):
    """Truth system and surrogate adjacency for a parameter-transfer case.

    CASE 1 scales K by 0.8 and M by 1.6 with C unchanged; the adjacency takes
    the K/M ratio 0.5, so the C/M pathway is knowingly off. CASE 2 scales K
    and C by 0.1. CASE 3 draws factors in [0.5, 1.5] for every spring, mass
    and damper; the adjacency receives the spring factors.
    """
    if case == 0:
        return system, adj
    if case == 1:
        return scaled_system(system, 0.8, 1.6, 1.0), scale_edges(adj, 0.8 / 1.6)
    if case == 2:
        return scaled_system(system, 0.1, 1.0, 0.1), scale_edges(adj, 0.1)
    if case == 3:
        rng = np.random.default_rng(seed)
        n_springs = len(system.spring_stiffnesses)
        kf = rng.uniform(0.5, 1.5, n_springs)
        mf = rng.uniform(0.5, 1.5, system.vertex_count)
        cf = rng.uniform(0.5, 1.5, n_springs)
        scales = spring_scale_matrix(system.vertex_count, kf, system.grounded)
        return scaled_system(system, kf, mf, cf), scale_edges(adj, scales)
    raise ValueError(f"unknown CASE label {case!r}")


@dataclass(frozen=True)
class TransferRow:
    label: str
    dof: int
    case: int
    report: MetricReport

    def csv_row(self) -> str:
        return f"{self.label},{self.dof},{self.case},{self.report.csv_row()}"


TRANSFER_HEADER = "label,dof,case,nmse,r2,pe_pct,n"


def evaluate_on(model: SurrogateModel, system: MdofSystem, adj: AdjacencySet,
                config: ExperimentConfig, seed: int, count: int):
    specs, truths = generate_episodes(config, system, seed=seed, count=count)
    pairs = [(rollout(model, adj, t.excitation), t) for t in truths]
    return evaluate_rollouts(pairs)


def transfer_table(model: SurrogateModel, config: ExperimentConfig, targets=None, cases=None,
                   workers=1):
    """Topology rows (one per target DOF) then parameter rows (one per CASE)."""
    tr = config.transfer
    targets = tr.targets if targets is None else targets
    cases = tr.cases if cases is None else cases
    for case in cases:
        if case not in CASE_LABELS:
            raise ValueError(f"unknown CASE label {case!r}")

    def topology_row(dof):
        system, graph = build_system(config.system, dof)
        report = evaluate_on(model, system, adjacency_for_model(model, graph), config,
                             tr.seed + dof, tr.episodes_per_kind)
        return TransferRow(f"{dof}-DOF", dof, 0, report)

    base_system, base_graph = build_system(config.system)
    base_adj = adjacency_for_model(model, base_graph)

    def case_row(case):
        system, adj = case_variant(case, base_system, base_adj, seed=tr.seed)
        report = evaluate_on(model, system, adj, config, tr.seed, tr.episodes_per_kind)
        return TransferRow(CASE_LABELS[case], config.system.dof, case, report)

    jobs = [(topology_row, d) for d in targets] + [(case_row, c) for c in cases]
    return _pool_map(lambda job: job[0](job[1]), jobs, workers)
