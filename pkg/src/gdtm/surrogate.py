"""Next-step acceleration surrogate: datasets, training and autoregressive rollout.

Each vertex is one row through a shared MLP. The row is the adjacency
aggregation of the normalized ``[velocity, displacement]`` state at step
``n`` concatenated with the normalized excitation at step ``n + 1``; the
target is the normalized acceleration at ``n + 1``. Rollout feeds predicted
accelerations back through the Newmark kinematic update.

The ``gat`` kind re-weights the coupling matrices with attention rows
``alpha_ij`` computed from the current state. Entries are scaled by the row
size ``|N(i)| + 1`` so uniform attention reproduces the plain adjacency, and
differences ``f_i - f_j`` keep the stiffness sign pattern.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .graph import HETEROGENEOUS, HOMOGENEOUS, AdjacencySet, aggregate
from .metrics import MetricReport
from .nn import (
    AdamState, GatLayer, MlpModel, ShapeError, adam_step, attention_backward,
    attention_forward, init_gat, init_mlp, mlp_backward, mlp_forward, smooth_l1,
)
from .oracle import EpisodeRecord, kinematic_update

logger = logging.getLogger(__name__)

KINDS = ("homogeneous", "heterogeneous", "gat")


class TrainingError(RuntimeError):
    def __init__(self, epoch, message="loss became non-finite"):
        super().__init__(f"epoch {epoch}: {message}")
        self.epoch = epoch


class RolloutError(RuntimeError):
    def __init__(self, step, message="non-finite prediction"):
        super().__init__(f"step {step}: {message}")
        self.step = step


@dataclass(frozen=True)
class NormalizationScalers:
    acceleration: float = 1.0
    velocity: float = 1.0
    displacement: float = 1.0
    excitation: float = 1.0

    def __post_init__(self):
        for name in ("acceleration", "velocity", "displacement", "excitation"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} scale must be > 0")

    def normalize(self, channel: str, values):
        return np.asarray(values) / getattr(self, channel)

    def denormalize(self, channel: str, values):
        return np.asarray(values) * getattr(self, channel)


def _max_abs(arrays):
    m = max(float(np.max(np.abs(a))) if a.size else 0.0 for a in arrays)
    return m if m > 0 else 1.0


def fit_scalers(episodes) -> NormalizationScalers:
    episodes = list(episodes)
    if not episodes:
        raise ValueError("fit_scalers needs at least one episode")
    return NormalizationScalers(
        acceleration=_max_abs([e.acceleration for e in episodes]),
        velocity=_max_abs([e.velocity for e in episodes]),
        displacement=_max_abs([e.displacement for e in episodes]),
        excitation=_max_abs([e.excitation for e in episodes]),
    )


def state_features(scalers: NormalizationScalers, velocity, displacement):
    return np.stack([np.asarray(velocity) / scalers.velocity,
                     np.asarray(displacement) / scalers.displacement], axis=-1)


@dataclass
class SampleSet:
    """Teacher-forced samples, one per (episode, step) with all vertices.

    ``features[s]`` is the normalized state at step ``n``; ``excitation[s]``
    and ``targets[s]`` are the normalized excitation and acceleration at
    ``n + 1``; ``inputs[s]`` is the aggregated row layout fed to the MLP.
    """

    adjacency: AdjacencySet
    features: np.ndarray
    excitation: np.ndarray
    targets: np.ndarray
    episode: np.ndarray
    steps: np.ndarray
    inputs: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.targets)

    def subset(self, index) -> "SampleSet":
        return SampleSet(self.adjacency, self.features[index], self.excitation[index],
                         self.targets[index], self.episode[index], self.steps[index],
                         self.inputs[index])


def build_dataset(episodes, adj: AdjacencySet, scalers: NormalizationScalers) -> SampleSet:
    feats, excs, targets, ep_idx, steps = [], [], [], [], []
    for k, ep in enumerate(episodes):
        if ep.vertex_count != adj.vertex_count:
            raise ShapeError(f"episode {k} has {ep.vertex_count} vertices, adjacency has {adj.vertex_count}")
        n = ep.steps - 1
        feats.append(state_features(scalers, ep.velocity[:-1], ep.displacement[:-1]))
        excs.append(ep.excitation[1:] / scalers.excitation)
        targets.append(ep.acceleration[1:] / scalers.acceleration)
        ep_idx.append(np.full(n, k))
        steps.append(np.arange(n))
    v = adj.vertex_count
    features = np.concatenate(feats) if feats else np.zeros((0, v, 2))
    excitation = np.concatenate(excs) if excs else np.zeros((0, v))
    inputs = np.concatenate([aggregate(adj, features), excitation[..., None]], axis=-1)
    return SampleSet(adj, features, excitation,
                     np.concatenate(targets) if targets else np.zeros((0, v)),
                     np.concatenate(ep_idx) if ep_idx else np.zeros(0, int),
                     np.concatenate(steps) if steps else np.zeros(0, int), inputs)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 64
    seed: int = 0
    train_fraction: float = 0.8
    noise_std: float = 0.0
    patience: int = 20
    learning_rate: float = 3e-4

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must be in (0, 1)")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")


@dataclass
class SurrogateModel:
    kind: str
    mlp: MlpModel
    scalers: NormalizationScalers
    dt: float
    beta: float = 0.25
    gamma: float = 0.5
    layout_kind: str = HOMOGENEOUS
    layout_n: int = 1
    gat: GatLayer | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown surrogate kind {self.kind!r}")
        if self.mlp.input_dim != 2 * self.layout_n + 1:
            raise ShapeError(f"MLP input {self.mlp.input_dim} != 2N+1 with N={self.layout_n}")
        if (self.kind == "gat") != (self.gat is not None):
            raise ValueError("gat layer required exactly when kind == 'gat'")
        if self.kind == "homogeneous" and self.layout_kind != HOMOGENEOUS:
            raise ValueError("homogeneous surrogate needs a homogeneous layout")
        if self.kind == "heterogeneous" and self.layout_kind != HETEROGENEOUS:
            raise ValueError("heterogeneous surrogate needs a heterogeneous layout")

    def params(self):
        return self.mlp.params() + (self.gat.params() if self.gat is not None else [])

    def with_params(self, params) -> "SurrogateModel":
        n = len(self.mlp.params())
        gat = self.gat.with_params(params[n:]) if self.gat is not None else None
        return replace(self, mlp=self.mlp.with_params(params[:n]), gat=gat)

    def check_adjacency(self, adj: AdjacencySet):
        if adj.kind != self.layout_kind or adj.N != self.layout_n:
            raise ShapeError(
                f"model expects {self.layout_kind} adjacency with N={self.layout_n}, "
                f"got {adj.kind} with N={adj.N}")

    @property
    def parameter_count(self) -> int:
        return sum(p.size for p in self.params())


def new_surrogate(kind, adj: AdjacencySet, scalers, dt, beta=0.25, gamma=0.5,
                  hidden=(16, 64), gat_hidden=8, seed=0) -> SurrogateModel:
    mlp = init_mlp((2 * adj.N + 1, *hidden, 1), seed=seed)
    gat = init_gat(2, gat_hidden, seed=seed + 1) if kind == "gat" else None
    return SurrogateModel(kind, mlp, scalers, dt, beta, gamma, adj.kind, adj.N, gat)


# forward / backward -------------------------------------------------------


class _Layout:
    """Adjacency-derived constants used by the batched forward pass."""

    def __init__(self, adj: AdjacencySet):
        self.adj = adj
        self.stacked = adj.stacked
        self.coupling = np.stack(adj.coupling_matrices)
        self.n_coupling = len(self.coupling)
        self.ground = self.coupling.sum(axis=2)
        off = self.coupling.copy()
        idx = np.arange(adj.vertex_count)
        off[:, idx, idx] = 0.0
        self.offdiag = off
        self.mask = (np.abs(off) > 0).any(axis=0)
        self.mask[idx, idx] = True
        self.row_size = self.mask.sum(axis=1).astype(float)

    def modulated(self, alpha):
        """Coupling matrices re-weighted by attention: ``(..., n_coupling, V, V)``."""
        a = alpha[..., None, :, :]
        scaled = self.row_size[:, None] * a * self.offdiag
        diag = self.row_size * (np.diagonal(alpha, axis1=-2, axis2=-1)[..., None, :] * self.ground)
        diag = diag - scaled.sum(axis=-1)
        idx = np.arange(self.adj.vertex_count)
        scaled[..., idx, idx] = diag
        return scaled

    def alpha_grad(self, g_mod):
        """Pull a gradient on the modulated matrices back to ``alpha``."""
        idx = np.arange(self.adj.vertex_count)
        g_diag = g_mod[..., idx, idx]
        g_alpha = self.row_size[:, None] * self.offdiag * (g_mod - g_diag[..., :, None])
        g_alpha = g_alpha.sum(axis=-3)
        g_self = (self.row_size * self.ground * g_diag).sum(axis=-2)
        g_alpha[..., idx, idx] = g_self
        return g_alpha


def _forward(model: SurrogateModel, layout: _Layout, features, excitation_next):
    """Predict normalized next accelerations for ``(B, V, 2)`` features."""
    b, v, _ = features.shape
    cache = {}
    if model.gat is None:
        agg = np.einsum("kij,bjf->bikf", layout.stacked, features).reshape(b, v, -1)
    else:
        alpha, att_cache = attention_forward(model.gat, features, layout.mask)
        mod = layout.modulated(alpha)
        agg_c = np.einsum("bkij,bjf->bikf", mod, features)
        if layout.n_coupling < layout.adj.N:
            agg_self = features[:, :, None, :]
            agg_c = np.concatenate([agg_c, agg_self], axis=2)
        agg = agg_c.reshape(b, v, -1)
        cache.update(alpha=alpha, att=att_cache)
    rows = np.concatenate([agg, excitation_next[..., None]], axis=-1).reshape(b * v, -1)
    out, acts = mlp_forward(model.mlp, rows, return_cache=True)
    cache.update(acts=acts, features=features, shape=(b, v))
    return out.reshape(b, v), cache


def _backward(model: SurrogateModel, layout: _Layout, cache, grad_pred):
    b, v = cache["shape"]
    gw, gb, g_rows = mlp_backward(model.mlp, cache["acts"], grad_pred.reshape(-1, 1))
    grads = gw + gb
    if model.gat is not None:
        g_agg = g_rows[:, :-1].reshape(b, v, layout.adj.N, 2)[:, :, : layout.n_coupling]
        g_mod = np.einsum("bikf,bjf->bkij", g_agg, cache["features"])
        g_alpha = layout.alpha_grad(g_mod)
        g_w, g_a, _ = attention_backward(model.gat, cache["att"], g_alpha)
        grads += [g_w, g_a]
    return grads


def predict_samples(model: SurrogateModel, samples: SampleSet, batch=4096):
    """Teacher-forced one-step predictions in normalized units."""
    model.check_adjacency(samples.adjacency)
    layout = _Layout(samples.adjacency)
    out = np.empty_like(samples.targets)
    for s in range(0, len(samples), batch):
        sl = slice(s, s + batch)
        out[sl], _ = _forward(model, layout, samples.features[sl], samples.excitation[sl])
    return out


def sample_loss(model: SurrogateModel, samples: SampleSet) -> float:
    if len(samples) == 0:
        return float("nan")
    return smooth_l1(predict_samples(model, samples), samples.targets)[0]


def loss_and_grads(model: SurrogateModel, layout: _Layout, features, excitation_next, targets):
    pred, cache = _forward(model, layout, features, excitation_next)
    loss, g = smooth_l1(pred, targets)
    return loss, _backward(model, layout, cache, g)


# training -----------------------------------------------------------------


@dataclass(frozen=True)
class EpisodeSplit:
    train: tuple[int, ...]
    test: tuple[int, ...]


def split_episodes(n_episodes, train_fraction=0.8, seed=0, strata=None) -> EpisodeSplit:
    """Seeded whole-episode split, stratified by ``strata`` labels when given."""
    if n_episodes < 1:
        raise ValueError("no episodes to split")
    rng = np.random.default_rng(seed)
    labels = list(strata) if strata is not None else [0] * n_episodes
    if len(labels) != n_episodes:
        raise ValueError("strata must label every episode")
    train, test = [], []
    for label in sorted(set(labels), key=str):
        members = np.array([i for i, lab in enumerate(labels) if lab == label])
        members = members[rng.permutation(len(members))]
        n_train = int(round(train_fraction * len(members)))
        if len(members) > 1:
            n_train = min(max(n_train, 1), len(members) - 1)
        train += members[:n_train].tolist()
        test += members[n_train:].tolist()
    return EpisodeSplit(tuple(sorted(train)), tuple(sorted(test)))


@dataclass
class TrainHistory:
    epochs: list = field(default_factory=list)
    train_loss: list = field(default_factory=list)
    test_loss: list = field(default_factory=list)
    best_epoch: int = 0

    def append(self, epoch, train_loss, test_loss):
        self.epochs.append(epoch)
        self.train_loss.append(train_loss)
        self.test_loss.append(test_loss)

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("epoch,train_loss,test_loss\n")
            for e, a, b in zip(self.epochs, self.train_loss, self.test_loss):
                fh.write(f"{e},{a!r},{b!r}\n")


def train(model: SurrogateModel, samples: SampleSet, config: TrainConfig = TrainConfig(),
          split: EpisodeSplit | None = None, strata=None):
    """Mini-batch Adam on Smooth-L1 with a whole-episode train/test split.

    Returns the parameters with the lowest test loss and the per-epoch
    history (epoch 0 is the untrained model).
    """
    if len(samples) == 0:
        raise ValueError("no training samples")
    model.check_adjacency(samples.adjacency)
    n_episodes = int(samples.episode.max()) + 1
    if split is None:
        split = split_episodes(n_episodes, config.train_fraction, config.seed, strata)
    train_set = samples.subset(np.isin(samples.episode, split.train))
    test_set = samples.subset(np.isin(samples.episode, split.test))
    if len(train_set) == 0:
        raise ValueError("split left no training samples")
    layout = _Layout(samples.adjacency)
    rng = np.random.default_rng(config.seed)

    params = [p.copy() for p in model.params()]
    state = AdamState.for_params(params, learning_rate=config.learning_rate)
    current = model.with_params(params)
    history = TrainHistory()

    def evaluate(m):
        return sample_loss(m, test_set) if len(test_set) else sample_loss(m, train_set)

    init_loss = evaluate(current)
    history.append(0, sample_loss(current, train_set), init_loss)
    best_loss, best_params, since_best = init_loss, params, 0

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train_set))
        total, count = 0.0, 0
        for s in range(0, len(order), config.batch_size):
            idx = order[s : s + config.batch_size]
            feats = train_set.features[idx]
            if config.noise_std > 0:
                feats = feats + rng.normal(0.0, config.noise_std, feats.shape)
            loss, grads = loss_and_grads(current, layout, feats, train_set.excitation[idx],
                                         train_set.targets[idx])
            if not np.isfinite(loss):
                raise TrainingError(epoch)
            params, state = adam_step(state, params, grads)
            current = current.with_params(params)
            total += loss * len(idx)
            count += len(idx)
        test_loss = evaluate(current)
        if not np.isfinite(test_loss):
            raise TrainingError(epoch)
        history.append(epoch, total / count, test_loss)
        if test_loss < best_loss:
            best_loss, best_params, since_best = test_loss, params, 0
            history.best_epoch = epoch
        else:
            since_best += 1
        logger.info("epoch %d train %.3e test %.3e", epoch, total / count, test_loss)
        if since_best >= config.patience:
            break
    return model.with_params([p.copy() for p in best_params]), history


def fit_surrogate(episodes, adj: AdjacencySet, kind="homogeneous",
                  config: TrainConfig = TrainConfig(), strata=None, hidden=(16, 64),
                  gat_hidden=8, beta=0.25, gamma=0.5):
    """Split episodes, fit scalers on the training part, build samples and train."""
    episodes = list(episodes)
    split = split_episodes(len(episodes), config.train_fraction, config.seed, strata)
    scalers = fit_scalers([episodes[i] for i in split.train])
    samples = build_dataset(episodes, adj, scalers)
    model = new_surrogate(kind, adj, scalers, episodes[0].dt, beta, gamma, hidden,
                          gat_hidden, seed=config.seed)
    trained, history = train(model, samples, config, split=split)
    return trained, history, split


# rollout ------------------------------------------------------------------


def rollout(model: SurrogateModel, adj: AdjacencySet, excitation, u0=None, v0=None, a0=None,
            capture_attention=False):
    """Autoregressive simulation driven only by ``excitation`` (``T x V``).

    The initial acceleration defaults to the model's response to the initial
    state and ``excitation[0]``. With ``capture_attention`` (``gat`` models)
    returns ``(record, attention)`` where ``attention`` is ``T x V x V``.
    """
    model.check_adjacency(adj)
    force = np.asarray(excitation, dtype=float)
    v_count = adj.vertex_count
    if force.ndim != 2 or force.shape[1] != v_count:
        raise ShapeError(f"excitation must be T x {v_count}, got {force.shape}")
    if capture_attention and model.gat is None:
        raise ValueError("attention capture needs a gat surrogate")
    layout = _Layout(adj)
    sc = model.scalers
    steps = force.shape[0]
    acc = np.zeros((steps, v_count))
    vel = np.zeros((steps, v_count))
    disp = np.zeros((steps, v_count))
    attention = np.zeros((steps, v_count, v_count)) if capture_attention else None
    if u0 is not None:
        disp[0] = u0
    if v0 is not None:
        vel[0] = v0
    exc_norm = force / sc.excitation

    def step_predict(n, e_index):
        feats = np.stack([vel[n] / sc.velocity, disp[n] / sc.displacement], axis=-1)[None]
        pred, cache = _forward(model, layout, feats, exc_norm[e_index][None])
        if attention is not None:
            attention[n] = cache["alpha"][0]
        return pred[0] * sc.acceleration

    acc[0] = step_predict(0, 0) if a0 is None else a0
    if not np.all(np.isfinite(acc[0])):
        raise RolloutError(0)
    for n in range(steps - 1):
        acc[n + 1] = step_predict(n, n + 1)
        if not np.all(np.isfinite(acc[n + 1])):
            raise RolloutError(n + 1)
        disp[n + 1], vel[n + 1] = kinematic_update(
            disp[n], vel[n], acc[n], acc[n + 1], model.dt, model.beta, model.gamma)
    if attention is not None and steps:
        # the last state's attention is never consumed by a prediction; record it anyway
        feats = np.stack([vel[-1] / sc.velocity, disp[-1] / sc.displacement], axis=-1)
        attention[-1], _ = attention_forward(model.gat, feats, layout.mask)
    record = EpisodeRecord(model.dt, force, acc, vel, disp)
    return (record, attention) if capture_attention else record


def timed_rollout(model, adj, excitation, **kwargs):
    """Rollout plus throughput in steps per second."""
    start = time.perf_counter()
    out = rollout(model, adj, excitation, **kwargs)
    elapsed = time.perf_counter() - start
    steps = np.shape(excitation)[0]
    return out, steps / elapsed if elapsed > 0 else float("inf")


def evaluate_rollout(predicted: EpisodeRecord, truth: EpisodeRecord) -> MetricReport:
    if predicted.acceleration.shape != truth.acceleration.shape:
        raise ShapeError(f"{predicted.acceleration.shape} vs {truth.acceleration.shape}")
    return MetricReport.compute(truth.acceleration, predicted.acceleration)


def evaluate_rollouts(pairs) -> MetricReport:
    """Pooled metrics over several ``(predicted, truth)`` pairs."""
    pairs = list(pairs)
    for p, t in pairs:
        if p.acceleration.shape != t.acceleration.shape:
            raise ShapeError(f"{p.acceleration.shape} vs {t.acceleration.shape}")
    truth = np.concatenate([t.acceleration.ravel() for _, t in pairs])
    pred = np.concatenate([p.acceleration.ravel() for p, _ in pairs])
    return MetricReport.compute(truth, pred)


def linear_oracle_surrogate(mass, stiffness, damping, scalers: NormalizationScalers, dt,
                            beta=0.25, gamma=0.5, hidden=(16, 64)) -> SurrogateModel:
    """Homogeneous surrogate whose MLP computes the uniform-chain equation of motion.

    In physical units the output is
    ``-(c/m) (A v)_i - (k/m) (A u)_i + E_i / m``. ReLUs stay active: the
    linear combination ``z`` is carried through as ``relu(z) - relu(-z)``.
    """
    h1, h2 = hidden
    if h1 < 2 or h2 < 2:
        raise ShapeError("hidden layers need at least two units")
    sa = scalers.acceleration
    coeffs = np.array([
        -damping / mass * scalers.velocity / sa,
        -stiffness / mass * scalers.displacement / sa,
        scalers.excitation / (mass * sa),
    ])
    w1 = np.zeros((3, h1))
    w1[:, 0], w1[:, 1] = coeffs, -coeffs
    w2 = np.zeros((h1, h2))
    w2[:2, :2] = [[1.0, -1.0], [-1.0, 1.0]]
    w3 = np.zeros((h2, 1))
    w3[:2, 0] = [1.0, -1.0]
    mlp = MlpModel([w1, w2, w3], [np.zeros(h1), np.zeros(h2), np.zeros(1)])
    return SurrogateModel("homogeneous", mlp, scalers, dt, beta, gamma, HOMOGENEOUS, 1)
