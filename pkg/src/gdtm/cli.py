"""Command-line front end: ``gdtm generate|train|rollout|eval|transfer|attention``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 shape or compatibility error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import checkpoint
from .config import ConfigError, ExperimentConfig, load_config
from .experiments import (
    TRANSFER_HEADER, adjacency_for_model, build_system, generate_episodes, train_from_config,
    transfer_table,
)
from .graph import GraphError, load_graph, save_graph
from .nn import ShapeError
from .oracle import EPISODE_HEADER, ExcitationSpec, SolverError, read_episode_csv, read_long_csv, write_episode_csv
from .spectral import extract_attention_history, psd, stft, write_psd_csv
from .surrogate import RolloutError, TrainingError, evaluate_rollout, timed_rollout

logger = logging.getLogger("gdtm")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_SHAPE = 0, 2, 3, 4
EXCITATION_HEADER = ["step", "time_s", "vertex", "excitation_N"]


def _config(args) -> ExperimentConfig:
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, excitation=replace(config.excitation, seed=args.seed),
                         training=replace(config.training, seed=args.seed))
    return config


def _out(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    return out


def read_excitation(path) -> tuple[np.ndarray, float | None]:
    """Excitation matrix from an excitation CSV or an episode CSV."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if header == EPISODE_HEADER:
        rec = read_episode_csv(path)
        return rec.excitation, (rec.dt if rec.steps > 1 else None)
    data = read_long_csv(path, EXCITATION_HEADER)
    steps = int(data[:, 0].max()) + 1
    n = int(data[:, 2].max()) + 1
    if len(data) != steps * n:
        raise ShapeError(f"{path}: expected {steps * n} rows, got {len(data)}")
    dt = float(data[n, 1]) if steps > 1 else None
    return data[:, 3].reshape(steps, n), dt


def write_excitation(excitation, dt, path):
    steps, n = excitation.shape
    with open(path, "w") as fh:
        fh.write(",".join(EXCITATION_HEADER) + "\n")
        for s in range(steps):
            for v in range(n):
                fh.write(f"{s},{s * dt!r},{v},{float(excitation[s, v])!r}\n")


def cmd_generate(args) -> int:
    config = _config(args)
    out = _out(args)
    system, graph = build_system(config.system)
    specs, records = generate_episodes(config, system, workers=args.workers)
    entries = []
    per_kind: dict[str, int] = {}
    for spec, rec in zip(specs, records):
        idx = per_kind.get(spec.kind, 0)
        per_kind[spec.kind] = idx + 1
        name = f"episode_{spec.kind}_{idx:02d}.csv"
        write_episode_csv(rec, out / name)
        entries.append({"file": name, "kind": spec.kind, **asdict(spec)})
    save_graph(graph, out / "graph.txt")
    manifest = {"dt": records[0].dt if records else 1.0 / config.solver.fs,
                "steps": config.solver.steps, "dof": system.vertex_count,
                "graph": "graph.txt", "episodes": entries}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    print(f"wrote {len(entries)} episodes to {out}")
    return EXIT_OK


def _load_manifest(path):
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"manifest {path} not found")
    manifest = json.loads(p.read_text())
    base = p.parent
    specs, records = [], []
    for e in manifest["episodes"]:
        fields = {k: e[k] for k in ("kind", "target_vertex", "amplitude", "frequency",
                                    "duration_steps", "seed")}
        specs.append(ExcitationSpec(**fields))
        records.append(read_episode_csv(base / e["file"], dt=manifest["dt"]))
    return manifest, specs, records


def cmd_train(args) -> int:
    config = _config(args)
    out = _out(args)
    manifest, specs, records = _load_manifest(args.manifest)
    graph = load_graph(Path(args.manifest).parent / manifest["graph"])
    model, history, split, _ = train_from_config(config, specs, records, graph)
    checkpoint.save(model, out / "checkpoint.json", config.training.seed)
    history.to_csv(out / "loss_history.csv")
    print(f"trained {model.kind} surrogate: input_dim={model.mlp.input_dim} "
          f"parameters={model.parameter_count} best_epoch={history.best_epoch} "
          f"test_loss={min(history.test_loss):.6e}")
    return EXIT_OK


def _rollout_inputs(args):
    model, _ = checkpoint.load(args.checkpoint)
    graph = load_graph(args.graph)
    excitation, dt = read_excitation(args.excitation)
    if excitation.shape[1] != graph.vertex_count:
        raise ShapeError(f"graph has {graph.vertex_count} vertices, excitation has {excitation.shape[1]}")
    if dt is not None and not np.isclose(dt, model.dt):
        raise ShapeError(f"excitation dt {dt} differs from checkpoint dt {model.dt}")
    try:
        adj = adjacency_for_model(model, graph)
        model.check_adjacency(adj)
    except ShapeError as exc:
        raise ShapeError(f"checkpoint/graph incompatible: {exc}") from exc
    return model, graph, adj, excitation


def cmd_rollout(args) -> int:
    model, graph, adj, excitation = _rollout_inputs(args)
    out = _out(args)
    capture = args.capture_attention
    if capture and model.gat is None:
        raise ShapeError("--capture-attention needs a gat checkpoint")
    result, rate = timed_rollout(model, adj, excitation, capture_attention=capture)
    record = result[0] if capture else result
    write_episode_csv(record, out / "predicted.csv")
    if capture:
        extract_attention_history(result[1], graph, "all", model.dt).to_csv(out / "attention.csv")
    print(f"throughput: {rate:.1f} steps/s ({record.steps} steps, {record.vertex_count} vertices)")
    return EXIT_OK


def cmd_eval(args) -> int:
    out = _out(args)
    pred = read_episode_csv(args.predicted)
    truth = read_episode_csv(args.truth)
    if pred.acceleration.shape != truth.acceleration.shape:
        raise ShapeError(f"predicted {pred.acceleration.shape} vs truth {truth.acceleration.shape}")
    report = evaluate_rollout(pred, truth)
    report.to_csv(out / "metrics.csv")
    print(report.csv_row())
    if args.psd:
        fs = 1.0 / truth.dt
        seg = min(256, truth.steps)
        for v in range(truth.vertex_count):
            for tag, rec in (("true", truth), ("pred", pred)):
                f, p = psd(rec.acceleration[:, v], fs, seg)
                write_psd_csv(f, p, out / f"psd_{tag}_v{v}.csv")
    return EXIT_OK


def cmd_transfer(args) -> int:
    config = _config(args)
    out = _out(args)
    model, _ = checkpoint.load(args.checkpoint)
    rows = transfer_table(model, config, workers=args.workers)
    text = TRANSFER_HEADER + "\n" + "".join(r.csv_row() + "\n" for r in rows)
    (out / "transfer.csv").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_attention(args) -> int:
    model, graph, adj, excitation = _rollout_inputs(args)
    if model.gat is None:
        raise ShapeError("attention needs a gat checkpoint")
    out = _out(args)
    (record, attention), rate = timed_rollout(model, adj, excitation, capture_attention=True)
    selector = "all"
    if args.edges:
        selector = [tuple(int(x) for x in pair.split("-")) for pair in args.edges.split(",")]
    history = extract_attention_history(attention, graph, selector, model.dt)
    history.to_csv(out / "attention.csv")
    fs = 1.0 / model.dt
    window = min(args.window, record.steps)
    for edge, series in zip(history.edges, history.series):
        name = f"stft_{edge.source}_{edge.target}.csv"
        stft(series, fs, window, max(1, window // 2)).to_csv(out / name)
    print(f"throughput: {rate:.1f} steps/s; {len(history.edges)} attention series")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gdtm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", default=None, help="sectioned key=value config file")
            p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=".", help="output directory")
        return p

    p = common(sub.add_parser("generate", help="simulate ground-truth episodes"))
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_generate)

    p = common(sub.add_parser("train", help="train a surrogate on generated episodes"))
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_train)

    for name, func, helptext in (("rollout", cmd_rollout, "roll a checkpoint forward"),
                                 ("attention", cmd_attention, "record attention of a gat rollout")):
        p = common(sub.add_parser(name, help=helptext), config=False)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--graph", required=True)
        p.add_argument("--excitation", required=True)
        if name == "rollout":
            p.add_argument("--capture-attention", action="store_true")
        else:
            p.add_argument("--edges", default="", help="comma list of source-target pairs")
            p.add_argument("--window", type=int, default=256)
        p.set_defaults(func=func)

    p = common(sub.add_parser("eval", help="metrics between predicted and true episodes"),
               config=False)
    p.add_argument("--predicted", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--psd", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = common(sub.add_parser("transfer", help="topology and parameter transfer table"))
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_transfer)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (TrainingError, RolloutError, SolverError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ShapeError, GraphError) as exc:
        print(f"shape error: {exc}", file=sys.stderr)
        return EXIT_SHAPE
    except (ConfigError, checkpoint.CheckpointError, FileNotFoundError, ValueError,
            KeyError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
