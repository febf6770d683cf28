"""Small float64 neural-network engine: layers, forward/backward, Adam.

Networks are stored as a list of :class:`LayerSpec` plus one parameter dict
per layer (``{"W", "b"}`` for dense/conv1d, empty otherwise). Batches always
carry the sample axis first.

Shapes per layer kind::

    dense    (B, in)        -> (B, out)         W: (in, out)
    conv1d   (B, L, C_in)   -> (B, L-k+1, C_out) W: (k, C_in, C_out), valid padding, stride 1
    reshape  (B, ...)       -> (B, *dims)
    flatten  (B, ...)       -> (B, prod)
"""

from __future__ import annotations

import copy
import itertools
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

ARCH_TAGS = ("generator", "cnn_d", "dense_d")
PARAM_KINDS = ("dense", "conv1d")
LAYER_KINDS = ("dense", "conv1d", "tanh", "relu", "sigmoid", "dropout", "flatten", "reshape")

_versions = itertools.count(1)


class ShapeError(ValueError):
    pass


class DivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    dims: tuple[int, ...] = ()
    rate: float = 0.0

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    def output_shape(self, in_shape: tuple[int, ...]) -> tuple[int, ...]:
        """Per-sample output shape for a per-sample input shape."""
        k = self.kind
        if k == "dense":
            if in_shape != (self.dims[0],):
                raise ShapeError(f"dense expects ({self.dims[0]},), got {in_shape}")
            return (self.dims[1],)
        if k == "conv1d":
            c_in, c_out, width = self.dims
            if len(in_shape) != 2 or in_shape[1] != c_in:
                raise ShapeError(f"conv1d expects (L, {c_in}), got {in_shape}")
            if in_shape[0] < width:
                raise ShapeError(f"conv1d input length {in_shape[0]} shorter than filter {width}")
            return (in_shape[0] - width + 1, c_out)
        if k == "reshape":
            if int(np.prod(in_shape)) != int(np.prod(self.dims)):
                raise ShapeError(f"cannot reshape {in_shape} to {self.dims}")
            return self.dims
        if k == "flatten":
            return (int(np.prod(in_shape)),)
        return in_shape

    def param_count(self) -> int:
        if self.kind == "dense":
            i, o = self.dims
            return i * o + o
        if self.kind == "conv1d":
            c_in, c_out, width = self.dims
            return width * c_in * c_out + c_out
        return 0


@dataclass
class Network:
    arch: str
    wl: int
    input_shape: tuple[int, ...]
    layers: list[LayerSpec]
    params: list[dict[str, np.ndarray]]
    seed: int = 0
    epoch: int = 0
    version: int = field(default_factory=lambda: next(_versions), compare=False, repr=False)

    def __post_init__(self):
        if self.arch not in ARCH_TAGS:
            raise ValueError(f"unknown arch {self.arch!r}")
        self.input_shape = tuple(int(d) for d in self.input_shape)
        shapes = self.shapes()
        for spec, p in zip(self.layers, self.params):
            if spec.kind == "dense":
                want = {"W": spec.dims, "b": (spec.dims[1],)}
            elif spec.kind == "conv1d":
                c_in, c_out, width = spec.dims
                want = {"W": (width, c_in, c_out), "b": (c_out,)}
            else:
                want = {}
            if {k: v.shape for k, v in p.items()} != want:
                raise ShapeError(f"parameter shapes for {spec.kind} do not match {want}")
        self._out_shape = shapes[-1]

    def shapes(self) -> list[tuple[int, ...]]:
        """Per-sample shape after every layer, input shape first."""
        out = [self.input_shape]
        for spec in self.layers:
            out.append(spec.output_shape(out[-1]))
        return out

    @property
    def output_shape(self) -> tuple[int, ...]:
        return self._out_shape

    def param_counts(self) -> list[int]:
        return [s.param_count() for s in self.layers if s.kind in PARAM_KINDS]

    def touch(self) -> None:
        """Mark parameters as modified so older forward caches are rejected."""
        self.version = next(_versions)

    def copy(self) -> "Network":
        net = copy.deepcopy(self)
        net.touch()
        return net

    def same_weights(self, other: "Network") -> bool:
        if len(self.params) != len(other.params):
            return False
        return all(
            a.keys() == b.keys() and all(np.array_equal(a[k], b[k]) for k in a)
            for a, b in zip(self.params, other.params)
        )


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(layers: list[LayerSpec], rng: np.random.Generator) -> list[dict[str, np.ndarray]]:
    params = []
    for spec in layers:
        if spec.kind == "dense":
            i, o = spec.dims
            params.append({"W": glorot_uniform(rng, (i, o), i, o), "b": np.zeros(o)})
        elif spec.kind == "conv1d":
            c_in, c_out, width = spec.dims
            w = glorot_uniform(rng, (width, c_in, c_out), width * c_in, width * c_out)
            params.append({"W": w, "b": np.zeros(c_out)})
        else:
            params.append({})
    return params


def build_generator(wl: int, noise_dim: int = 128, hidden: int = 256, seed: int = 0,
                    output_tanh: bool = False) -> Network:
    if noise_dim < 1 or wl < 1:
        raise ValueError("noise_dim and wl must be positive")
    layers = [
        LayerSpec("dense", (noise_dim, hidden)),
        LayerSpec("tanh"),
        LayerSpec("dense", (hidden, wl)),
    ]
    if output_tanh:
        layers.append(LayerSpec("tanh"))
    rng = np.random.default_rng([seed, 0])
    return Network("generator", wl, (noise_dim,), layers, init_params(layers, rng), seed)


def build_discriminator(arch: str, wl: int, dropout: float = 0.25, seed: int = 0,
                        filters: int = 16, filter_size: int = 5, hidden: int = 16,
                        dense_hidden: int = 256) -> Network:
    """CNN or dense discriminator with a two-unit sigmoid head (unit 0 real, unit 1 fake)."""
    if arch == "cnn_d":
        if wl <= filter_size:
            raise ValueError(f"cnn_d needs wl > filter size {filter_size}, got {wl}")
        conv_len = wl - filter_size + 1
        layers = [
            LayerSpec("reshape", (wl, 1)),
            LayerSpec("conv1d", (1, filters, filter_size)),
            LayerSpec("relu"),
            LayerSpec("dropout", rate=dropout),
            LayerSpec("flatten"),
            LayerSpec("dense", (conv_len * filters, hidden)),
            LayerSpec("tanh"),
            LayerSpec("dense", (hidden, 2)),
            LayerSpec("sigmoid"),
        ]
    elif arch == "dense_d":
        layers = [
            LayerSpec("dense", (wl, dense_hidden)),
            LayerSpec("tanh"),
            LayerSpec("dropout", rate=dropout),
            LayerSpec("dense", (dense_hidden, hidden)),
            LayerSpec("tanh"),
            LayerSpec("dense", (hidden, 2)),
            LayerSpec("sigmoid"),
        ]
    else:
        raise ValueError(f"unknown discriminator arch {arch!r}")
    rng = np.random.default_rng([seed, 1])
    return Network(arch, wl, (wl,), layers, init_params(layers, rng), seed)


@dataclass
class Cache:
    """Intermediates of one forward pass, tied to a parameter version."""

    net_id: int
    version: int
    inputs: list = field(default_factory=list)
    extras: list = field(default_factory=list)
    # layer index -> number of layers executed as one fused block
    fused: dict = field(default_factory=dict)


def _conv_patches(x: np.ndarray, width: int) -> np.ndarray:
    # (B, L, C) -> (B, L-k+1, k*C + 1): row-major over (offset, channel), then a ones column for the bias
    win = np.lib.stride_tricks.sliding_window_view(x, width, axis=1)  # (B, Lout, C, k)
    b, lout, c, k = win.shape
    out = np.empty((b, lout, k * c + 1))
    out[:, :, :-1].reshape(b, lout, k, c)[:] = win.transpose(0, 1, 3, 2)
    out[:, :, -1] = 1.0
    return out


def _conv_matrix(p: dict[str, np.ndarray]) -> np.ndarray:
    w = p["W"]
    return np.vstack([w.reshape(-1, w.shape[-1]), p["b"][None, :]])


def _dropout_threshold(rate: float) -> tuple[int, float]:
    # masks come from 16-bit draws: a unit is kept iff its draw >= threshold
    threshold = int(round(rate * 65536))
    keep = 1.0 - threshold / 65536
    return threshold, (1.0 / keep if keep > 0 else 0.0)


def _fusable(layers: list[LayerSpec], i: int) -> int:
    """Length of a conv1d -> relu [-> dropout] run starting at ``i`` (0 if none)."""
    if layers[i].kind != "conv1d" or i + 1 >= len(layers) or layers[i + 1].kind != "relu":
        return 0
    if i + 2 < len(layers) and layers[i + 2].kind == "dropout":
        return 3
    return 2


def forward(net: Network, x, *, train: bool = False, rng: np.random.Generator | None = None,
            fuse: bool = True):
    """Run the network on a batch. Returns ``(output, cache)``.

    In infer mode dropout is the identity (inverted dropout scales during training).
    ``fuse`` executes conv1d -> relu -> dropout runs in one compiled pass; the
    result and the dropout masks are the same as with ``fuse=False``.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[1:] != net.input_shape:
        if x.shape == net.input_shape:
            x = x[None]
        else:
            raise ShapeError(f"input {x.shape[1:]} does not match input layer {net.input_shape}")
    if train and rng is None and any(s.kind == "dropout" and s.rate > 0 for s in net.layers):
        raise ValueError("train mode with dropout needs an rng")
    cache = Cache(id(net), net.version)
    layers = net.layers
    i = 0
    while i < len(layers):
        spec, p = layers[i], net.params[i]
        k = spec.kind
        span = _fusable(layers, i) if fuse else 0
        if span:
            c_in, c_out, width = spec.dims
            if x.ndim != 3 or x.shape[2] != c_in or x.shape[1] < width:
                raise ShapeError(f"layer {i} (conv1d): got input {x.shape[1:]}")
            threshold, scale, seed = 0, 1.0, 0
            if span == 3 and train and layers[i + 2].rate > 0:
                threshold, scale = _dropout_threshold(layers[i + 2].rate)
                seed = int(rng.integers(0, 2**63))
            out = np.empty((x.shape[0], x.shape[1] - width + 1, c_out))
            _kernels.conv_relu_dropout_forward(np.ascontiguousarray(x), p["W"], p["b"], seed,
                                               threshold, scale, out)
            cache.inputs.extend([x] + [None] * (span - 1))
            cache.extras.extend([None] * (span - 1) + [(out, scale)])
            cache.fused[i] = span
            x = out
            i += span
            continue
        cache.inputs.append(x)
        extra = None
        if k == "dense":
            if x.ndim != 2 or x.shape[1] != spec.dims[0]:
                raise ShapeError(f"layer {i} (dense): got input {x.shape[1:]}")
            x = x @ p["W"] + p["b"]
        elif k == "conv1d":
            if x.ndim != 3 or x.shape[2] != spec.dims[0] or x.shape[1] < spec.dims[2]:
                raise ShapeError(f"layer {i} (conv1d): got input {x.shape[1:]}")
            patches = _conv_patches(x, spec.dims[2])
            extra = patches
            x = patches @ _conv_matrix(p)
        elif k == "tanh":
            x = np.tanh(x)
            extra = x
        elif k == "relu":
            x = np.maximum(x, 0.0)
        elif k == "sigmoid":
            # logits kept for stable cross-entropy; exp overflow correctly gives 0
            extra = x
            with np.errstate(over="ignore"):
                x = 1.0 / (1.0 + np.exp(-x))
        elif k == "dropout":
            if train and spec.rate > 0:
                seed = int(rng.integers(0, 2**63))
                bits = _kernels.dropout_bits(seed, x.size).reshape(x.shape)
                threshold, scale = _dropout_threshold(spec.rate)
                extra = bits
                x = _kernels.masked_scale(np.ascontiguousarray(x), bits, threshold, scale,
                                          np.empty_like(x))
        elif k == "flatten":
            x = x.reshape(len(x), -1)
        elif k == "reshape":
            x = x.reshape((len(x),) + spec.dims)
        cache.extras.append(extra)
        i += 1
    return x, cache


def predict(net: Network, x, chunk: int = 4096) -> np.ndarray:
    """Infer-mode outputs, evaluated in chunks."""
    x = np.asarray(x, dtype=np.float64)
    if len(x) <= chunk:
        return forward(net, x)[0]
    return np.concatenate([forward(net, x[i:i + chunk])[0] for i in range(0, len(x), chunk)])


def backward(net: Network, cache: Cache, grad_out, *, from_logits: bool = False,
             param_grads: bool = True, input_grad: bool = True):
    """Backpropagate ``grad_out`` through the cached pass.

    Returns ``(grads, grad_input)`` where ``grads`` is a list of dicts aligned with
    ``net.params`` (empty dicts when ``param_grads`` is False). With
    ``from_logits=True`` the final sigmoid is skipped and ``grad_out`` is taken
    as the gradient with respect to its logits. With ``input_grad=False`` the
    pass stops at the lowest parameterised layer and ``grad_input`` is None.
    """
    if cache.net_id != id(net) or cache.version != net.version:
        raise ValueError("stale forward cache: parameters changed since the forward pass")
    layers = net.layers
    n = len(layers)
    if from_logits:
        if layers[-1].kind != "sigmoid":
            raise ValueError("from_logits requires a final sigmoid layer")
        n -= 1
    g = np.asarray(grad_out, dtype=np.float64)
    grads: list[dict[str, np.ndarray]] = [{} for _ in layers]
    lowest = 0
    if not input_grad:
        if not param_grads:
            return grads, None
        lowest = min(i for i, s in enumerate(layers) if s.kind in PARAM_KINDS)
    # walk back over execution units (fused blocks count once)
    units, i = [], 0
    while i < n:
        span = cache.fused.get(i, 1)
        units.append((i, span))
        i += span
    for i, span in reversed(units):
        if i < lowest:
            break
        need_dx = input_grad or i > lowest
        spec, p = layers[i], net.params[i]
        x = cache.inputs[i]
        if span > 1:
            h, scale = cache.extras[i + span - 1]
            g = np.ascontiguousarray(g.reshape(h.shape))
            dw = np.empty_like(p["W"])
            db = np.empty_like(p["b"])
            dx = np.empty_like(x) if need_dx else np.empty((0, 0, 0))
            _kernels.conv_relu_dropout_backward(g, h, np.ascontiguousarray(x), p["W"], scale,
                                                param_grads, need_dx, dw, db, dx)
            if param_grads:
                grads[i] = {"W": dw, "b": db}
            g = dx if need_dx else None
            continue
        extra = cache.extras[i]
        k = spec.kind
        if k == "dense":
            if param_grads:
                grads[i] = {"W": x.T @ g, "b": g.sum(axis=0)}
            if need_dx:
                g = g @ p["W"].T
        elif k == "conv1d":
            c_in, c_out, width = spec.dims
            if param_grads:
                dw = extra.reshape(-1, extra.shape[-1]).T @ g.reshape(-1, c_out)
                grads[i] = {"W": dw[:-1].reshape(width, c_in, c_out), "b": dw[-1].copy()}
            if need_dx:
                gp = g @ p["W"].reshape(-1, c_out).T
                g = _kernels.conv_input_grad(gp, width, c_in, np.empty_like(x))
        elif k == "tanh":
            g = g * (1.0 - extra * extra)
        elif k == "relu":
            g = _kernels.relu_grad(np.ascontiguousarray(g), np.ascontiguousarray(x), np.empty_like(g))
        elif k == "sigmoid":
            with np.errstate(over="ignore"):
                s = 1.0 / (1.0 + np.exp(-extra))
            g = g * s * (1.0 - s)
        elif k == "dropout":
            if extra is not None:
                threshold, scale = _dropout_threshold(spec.rate)
                g = _kernels.masked_scale(np.ascontiguousarray(g), extra, threshold, scale,
                                          np.empty_like(g))
        elif k in ("flatten", "reshape"):
            g = g.reshape(x.shape)
    return grads, (g if input_grad else None)


def bce_with_logits(logits: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Per-element binary cross-entropy of sigmoid(logits) against targets."""
    return np.logaddexp(0.0, logits) - targets * logits


def output_logits(cache: Cache) -> np.ndarray:
    """Pre-sigmoid values of a network ending in a sigmoid layer."""
    return cache.extras[-1]


@dataclass
class TrainState:
    net: Network
    m: list[dict[str, np.ndarray]]
    v: list[dict[str, np.ndarray]]
    step: int = 0
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def create(cls, net: Network, beta1: float = 0.5, beta2: float = 0.999, eps: float = 1e-8):
        zeros = [{k: np.zeros_like(a) for k, a in p.items()} for p in net.params]
        return cls(net, zeros, copy.deepcopy(zeros), 0, beta1, beta2, eps)


def optimizer_step(state: TrainState, grads: list[dict[str, np.ndarray]], learning_rate: float) -> TrainState:
    """One Adam update, in place on ``state.net``; returns the same state."""
    for g in grads:
        for a in g.values():
            if not np.all(np.isfinite(a)):
                raise DivergedError("diverged: non-finite gradient")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    for p, g, m, v in zip(state.net.params, grads, state.m, state.v):
        for key in p:
            if key in g:
                _kernels.adam_update(p[key], np.ascontiguousarray(g[key]), m[key], v[key],
                                     learning_rate, b1, b2, bc1, bc2, state.eps)
    state.net.touch()
    return state
