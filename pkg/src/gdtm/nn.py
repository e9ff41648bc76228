"""Small differentiable building blocks written directly in numpy.

Contains the per-vertex MLP, the Smooth-L1 loss, bias-corrected Adam, and a
single-head graph attention layer. Every backward pass here is exact and is
checked against central finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_LAYER_DIMS = (3, 16, 64, 1)


class ShapeError(ValueError):
    pass


def glorot_uniform(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


@dataclass
class MlpModel:
    """Affine layers with ReLU between them; weights are ``(fan_in, fan_out)``."""

    weights: list
    biases: list

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ShapeError("need matching, non-empty weight and bias lists")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ShapeError(f"layer {i}: weight {w.shape} / bias {b.shape} mismatch")
            if i and w.shape[0] != self.weights[i - 1].shape[1]:
                raise ShapeError(f"layer {i} input {w.shape[0]} != previous output")
        if self.weights[-1].shape[1] != 1:
            raise ShapeError("the surrogate MLP must have a single output")

    @property
    def layer_dims(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def parameter_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def params(self) -> list:
        return [*self.weights, *self.biases]

    def with_params(self, params) -> "MlpModel":
        n = len(self.weights)
        return MlpModel(list(params[:n]), list(params[n:]))

    def copy(self) -> "MlpModel":
        return MlpModel([w.copy() for w in self.weights], [b.copy() for b in self.biases])


def init_mlp(layer_dims=DEFAULT_LAYER_DIMS, seed=0) -> MlpModel:
    dims = list(layer_dims)
    if len(dims) < 2 or dims[-1] != 1:
        raise ShapeError(f"layer dims must end in 1, got {dims}")
    rng = np.random.default_rng(seed)
    weights = [glorot_uniform(rng, a, b) for a, b in zip(dims[:-1], dims[1:])]
    biases = [np.zeros(b) for b in dims[1:]]
    return MlpModel(weights, biases)


def mlp_forward(model: MlpModel, inputs, return_cache=False):
    """Map ``(batch, input_dim)`` rows to ``(batch, 1)``."""
    x = np.asarray(inputs, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise ShapeError(f"inputs {x.shape} do not match input width {model.input_dim}")
    activations = [x]
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        x = x @ w + b
        if i < last:
            x = np.maximum(x, 0.0)
        activations.append(x)
    return (x, activations) if return_cache else x


def mlp_backward(model: MlpModel, activations, upstream):
    """Reverse pass through a cached forward.

    Returns ``(weight_grads, bias_grads, input_grad)``.
    """
    g = np.asarray(upstream, dtype=float)
    if g.shape != activations[-1].shape:
        raise ShapeError(f"upstream gradient {g.shape} != output {activations[-1].shape}")
    n = len(model.weights)
    w_grads = [None] * n
    b_grads = [None] * n
    for i in range(n - 1, -1, -1):
        if i < n - 1:
            g = g * (activations[i + 1] > 0)
        w_grads[i] = activations[i].T @ g
        b_grads[i] = g.sum(axis=0)
        g = g @ model.weights[i].T
    return w_grads, b_grads, g


def smooth_l1(pred, target, delta=1.0):
    """Mean Smooth-L1 loss and its gradient with respect to ``pred``."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ShapeError(f"pred {pred.shape} and target {target.shape} differ")
    x = pred - target
    ax = np.abs(x)
    small = ax < delta
    loss = np.where(small, 0.5 * x * x, delta * (ax - 0.5 * delta))
    grad = np.where(small, x, delta * np.sign(x)) / x.size
    return float(loss.mean()), grad


@dataclass
class AdamState:
    first_moment: list
    second_moment: list
    step_count: int = 0
    learning_rate: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params, **kwargs) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], **kwargs)


def adam_step(state: AdamState, params, grads):
    """One bias-corrected Adam update; returns ``(new_params, new_state)``."""
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ShapeError("params, grads and moments must align")
    t = state.step_count + 1
    b1, b2 = state.beta1, state.beta2
    new_m, new_v, new_p = [], [], []
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if p.shape != g.shape:
            raise ShapeError(f"param {p.shape} and grad {g.shape} differ")
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        new_p.append(p - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon))
        new_m.append(m)
        new_v.append(v)
    new_state = AdamState(new_m, new_v, t, state.learning_rate, b1, b2, state.epsilon)
    return new_p, new_state


# graph attention -----------------------------------------------------------


@dataclass
class GatLayer:
    """Single-head attention over ``neighbors(i) + {i}``.

    ``transform`` maps vertex features to ``d`` hidden units and
    ``attention_vector`` (length ``2d``) scores the concatenated pair.
    """

    transform: np.ndarray
    attention_vector: np.ndarray
    leaky_slope: float = 0.2
    last_attention: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        d = self.transform.shape[1]
        if self.attention_vector.shape != (2 * d,):
            raise ShapeError(f"attention vector must have length {2 * d}")

    @property
    def hidden_dim(self) -> int:
        return self.transform.shape[1]

    def params(self) -> list:
        return [self.transform, self.attention_vector]

    def with_params(self, params) -> "GatLayer":
        return GatLayer(params[0], params[1], self.leaky_slope)

    def copy(self) -> "GatLayer":
        return self.with_params([p.copy() for p in self.params()])


def init_gat(in_features=2, hidden=8, seed=0, leaky_slope=0.2) -> GatLayer:
    rng = np.random.default_rng(seed)
    return GatLayer(glorot_uniform(rng, in_features, hidden),
                    glorot_uniform(rng, 2 * hidden, 1)[:, 0], leaky_slope)


def attention_mask(neighbor_matrix) -> np.ndarray:
    """Boolean ``V x V`` mask of ``neighbors + self`` from any coupling matrix."""
    a = np.asarray(neighbor_matrix)
    mask = a != 0
    np.fill_diagonal(mask, True)
    return mask


def graph_mask(graph) -> np.ndarray:
    mask = np.eye(graph.vertex_count, dtype=bool)
    for e in graph.edges:
        mask[e.i, e.j] = mask[e.j, e.i] = True
    return mask


def attention_forward(layer: GatLayer, features, mask):
    """Attention rows for ``(..., V, F)`` features; returns ``(alpha, cache)``."""
    f = np.asarray(features, dtype=float)
    if f.shape[-1] != layer.transform.shape[0]:
        raise ShapeError(f"feature width {f.shape[-1]} != transform input {layer.transform.shape[0]}")
    if f.shape[-2] != mask.shape[0]:
        raise ShapeError(f"{f.shape[-2]} vertices but mask is {mask.shape}")
    d = layer.hidden_dim
    z = f @ layer.transform
    p = z @ layer.attention_vector[:d]
    q = z @ layer.attention_vector[d:]
    raw = p[..., :, None] + q[..., None, :]
    scores = np.where(raw > 0, raw, layer.leaky_slope * raw)
    alpha = _masked_softmax(scores, mask)
    return alpha, (f, z, raw, alpha, mask)


def _masked_softmax(scores, mask):
    s = np.where(mask, scores, -np.inf)
    s = s - s.max(axis=-1, keepdims=True)
    e = np.exp(s)
    return e / e.sum(axis=-1, keepdims=True)


def attention_backward(layer: GatLayer, cache, grad_alpha):
    """Gradients of ``sum(grad_alpha * alpha)``.

    Returns ``(transform_grad, attention_vector_grad, feature_grad)``.
    """
    f, z, raw, alpha, mask = cache
    d = layer.hidden_dim
    g = np.where(mask, grad_alpha, 0.0)
    g_scores = alpha * (g - (alpha * g).sum(axis=-1, keepdims=True))
    g_raw = g_scores * np.where(raw > 0, 1.0, layer.leaky_slope)
    g_p = g_raw.sum(axis=-1)
    g_q = g_raw.sum(axis=-2)
    a1, a2 = layer.attention_vector[:d], layer.attention_vector[d:]
    z2 = z.reshape(-1, d)
    g_a = np.concatenate([z2.T @ g_p.reshape(-1), z2.T @ g_q.reshape(-1)])
    g_z = g_p[..., None] * a1 + g_q[..., None] * a2
    g_w = f.reshape(-1, f.shape[-1]).T @ g_z.reshape(-1, d)
    g_f = g_z @ layer.transform.T
    return g_w, g_a, g_f


def gat_attention(layer: GatLayer, features, graph) -> np.ndarray:
    """``V x V`` attention matrix for one feature snapshot on ``graph``."""
    alpha, _ = attention_forward(layer, features, graph_mask(graph))
    layer.last_attention = alpha
    return alpha
