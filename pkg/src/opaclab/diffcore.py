"""Reverse-mode multilayer perceptron core.

Networks are plain affine/activation stacks evaluated in float64. Every
parameter of one network lives in a single flat vector (``ParamStore.flat``);
the named arrays in ``ParamStore.params`` are views into it. That keeps the
optimizer, target averaging and checkpointing down to a few vector kernels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import kernels
from .errors import InputError, NumericError

ACTIVATIONS = ("tanh", "relu")


@dataclass(frozen=True)
class MLPSpec:
    input_dim: int
    hidden_dims: tuple[int, ...] = (256, 256)
    output_dim: int = 1
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if len(self.hidden_dims) < 1:
            raise InputError("hidden_dims must have at least one layer")
        if min(self.dims) <= 0:
            raise InputError(f"all dimensions must be positive, got {self.dims}")
        if self.activation not in ACTIVATIONS:
            raise InputError(f"activation must be one of {ACTIVATIONS}")

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_dims, self.output_dim)

    @property
    def n_layers(self) -> int:
        return len(self.dims) - 1

    def layer_shapes(self) -> dict[str, tuple[int, ...]]:
        shapes: dict[str, tuple[int, ...]] = {}
        for i, (fan_in, fan_out) in enumerate(zip(self.dims[:-1], self.dims[1:])):
            shapes[f"W{i}"] = (fan_in, fan_out)
            shapes[f"b{i}"] = (fan_out,)
        return shapes

    def param_count(self) -> int:
        return sum(math.prod(s) for s in self.layer_shapes().values())


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InputError("learning_rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise InputError("beta1 and beta2 must lie in (0, 1)")
        if not self.epsilon > 0:
            raise InputError("epsilon must be positive")


def _views(flat: np.ndarray, shapes: Mapping[str, tuple[int, ...]]) -> dict[str, np.ndarray]:
    out, offset = {}, 0
    for name, shape in shapes.items():
        size = math.prod(shape)
        out[name] = flat[offset : offset + size].reshape(shape)
        offset += size
    return out


class ParamStore:
    """Named parameters plus same-shaped gradient and Adam moment slots."""

    def __init__(self, shapes: Mapping[str, tuple[int, ...]]):
        self.shapes = {k: tuple(int(d) for d in v) for k, v in shapes.items()}
        size = sum(math.prod(s) for s in self.shapes.values())
        self.flat = np.zeros(size)
        self.grad_flat = np.zeros(size)
        self.m_flat = np.zeros(size)
        self.v_flat = np.zeros(size)
        self.opt_t = 0
        self.params = _views(self.flat, self.shapes)
        self.grads = _views(self.grad_flat, self.shapes)
        self.opt_m = _views(self.m_flat, self.shapes)
        self.opt_v = _views(self.v_flat, self.shapes)

    @property
    def size(self) -> int:
        return self.flat.size

    def zero_grad(self) -> None:
        self.grad_flat[...] = 0.0

    def copy(self) -> "ParamStore":
        new = ParamStore(self.shapes)
        new.flat[...] = self.flat
        new.grad_flat[...] = self.grad_flat
        new.m_flat[...] = self.m_flat
        new.v_flat[...] = self.v_flat
        new.opt_t = self.opt_t
        return new

    def load_from(self, other: "ParamStore") -> None:
        """Copy parameter values (not optimizer state) from ``other``."""
        _check_compatible(self, other)
        self.flat[...] = other.flat

    def state_arrays(self, prefix: str = "") -> dict[str, np.ndarray]:
        out = {}
        for name in self.shapes:
            out[f"{prefix}{name}"] = self.params[name].copy()
            out[f"{prefix}{name}@m"] = self.opt_m[name].copy()
            out[f"{prefix}{name}@v"] = self.opt_v[name].copy()
        out[f"{prefix}@t"] = np.array(self.opt_t, dtype=np.int64)
        return out

    def load_state_arrays(self, arrays: Mapping[str, np.ndarray], prefix: str = "") -> None:
        for name, shape in self.shapes.items():
            value = np.asarray(arrays[f"{prefix}{name}"])
            if value.shape != shape:
                raise InputError(f"checkpoint shape mismatch for {prefix}{name}: {value.shape} != {shape}")
            self.params[name][...] = value
            self.opt_m[name][...] = arrays[f"{prefix}{name}@m"]
            self.opt_v[name][...] = arrays[f"{prefix}{name}@v"]
        self.opt_t = int(arrays[f"{prefix}@t"])


def _check_compatible(a: ParamStore, b: ParamStore) -> None:
    if a.shapes != b.shapes:
        raise InputError("parameter stores have different shapes")


def init_params(
    spec: MLPSpec,
    rng: np.random.Generator,
    extra: Mapping[str, tuple[int, ...]] | None = None,
) -> ParamStore:
    """Fresh store: weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.

    ``extra`` declares additional free parameters (initialized to zero) that
    are optimized together with the network, e.g. a state-independent
    log standard deviation.
    """
    shapes = dict(spec.layer_shapes())
    for name, shape in (extra or {}).items():
        if name in shapes:
            raise InputError(f"extra parameter {name!r} collides with a layer name")
        shapes[name] = tuple(shape)
    store = ParamStore(shapes)
    _draw_weights(store, spec, rng)
    return store


def _draw_weights(store: ParamStore, spec: MLPSpec, rng: np.random.Generator) -> None:
    for i, fan_in in enumerate(spec.dims[:-1]):
        bound = 1.0 / math.sqrt(fan_in)
        w = store.params[f"W{i}"]
        w[...] = rng.uniform(-bound, bound, size=w.shape)


def reset_params(store: ParamStore, spec: MLPSpec, rng: np.random.Generator) -> ParamStore:
    """Re-draw all parameters in place and clear optimizer state."""
    store.flat[...] = 0.0
    store.grad_flat[...] = 0.0
    store.m_flat[...] = 0.0
    store.v_flat[...] = 0.0
    store.opt_t = 0
    _draw_weights(store, spec, rng)
    return store


@dataclass
class ForwardCache:
    activations: list[np.ndarray] = field(default_factory=list)
    squeeze: bool = False


def _as_batch(store: ParamStore, spec: MLPSpec, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise InputError(f"expected input of width {spec.input_dim}, got shape {x.shape}")
    return x, squeeze


def forward_cached(store: ParamStore, spec: MLPSpec, x) -> tuple[np.ndarray, ForwardCache]:
    a, squeeze = _as_batch(store, spec, x)
    cache = ForwardCache([a], squeeze)
    last = spec.n_layers - 1
    p = store.params
    for i in range(spec.n_layers):
        z = a @ p[f"W{i}"]
        z += p[f"b{i}"]
        if i < last:
            if spec.activation == "tanh":
                a = np.tanh(z)
            else:
                a = np.maximum(z, 0.0)
            cache.activations.append(a)
        else:
            a = z
    return (a[0] if squeeze else a), cache


def forward(store: ParamStore, spec: MLPSpec, x) -> np.ndarray:
    return forward_cached(store, spec, x)[0]


def backward(store: ParamStore, spec: MLPSpec, cache: ForwardCache, grad_out,
             accumulate: bool = True) -> np.ndarray:
    """Accumulate parameter gradients for ``grad_out``; return d/d(input).

    With ``accumulate=False`` only the input gradient is computed.
    """
    g = np.asarray(grad_out, dtype=np.float64)
    if cache.squeeze:
        g = g[None, :]
    p, grads = store.params, store.grads
    acts = cache.activations
    for i in range(spec.n_layers - 1, -1, -1):
        a_prev = acts[i]
        if accumulate:
            grads[f"W{i}"] += a_prev.T @ g
            grads[f"b{i}"] += g.sum(axis=0)
        g = g @ p[f"W{i}"].T
        if i > 0:
            if spec.activation == "tanh":
                g *= 1.0 - a_prev * a_prev
            else:
                g *= a_prev > 0.0
    return g[0] if cache.squeeze else g


def value_and_grad(
    store: ParamStore,
    spec: MLPSpec,
    x,
    loss_fn: Callable[[np.ndarray], tuple[float, np.ndarray]],
    name: str = "loss",
) -> float:
    """Evaluate ``loss_fn(forward(x))`` and fill ``store.grads`` with its gradient.

    ``loss_fn`` returns the scalar loss and its derivative with respect to
    the network outputs. Existing gradients are overwritten.
    """
    out, cache = forward_cached(store, spec, x)
    loss, g_out = loss_fn(out)
    check_finite(loss, name)
    store.zero_grad()
    backward(store, spec, cache, g_out)
    return float(loss)


def check_finite(value, name: str) -> None:
    if not np.all(np.isfinite(value)):
        raise NumericError(name)


def optimizer_step(store: ParamStore, cfg: OptimizerConfig) -> ParamStore:
    if not np.isfinite(store.grad_flat).all():
        raise NumericError("gradient", "non-finite gradient entry")
    store.opt_t += 1
    kernels.adam_update(
        store.flat,
        store.grad_flat,
        store.m_flat,
        store.v_flat,
        cfg.learning_rate,
        cfg.beta1,
        cfg.beta2,
        cfg.epsilon,
        store.opt_t,
    )
    return store


def polyak_update(target: ParamStore, main: ParamStore, rho: float) -> ParamStore:
    """``target <- rho * target + (1 - rho) * main``, elementwise."""
    _check_compatible(target, main)
    if not 0.0 < rho < 1.0:
        raise InputError("rho must lie in (0, 1)")
    kernels.polyak(target.flat, main.flat, float(rho))
    return target


def save_checkpoint(path, stores: Mapping[str, ParamStore], meta: Mapping[str, np.ndarray] | None = None) -> None:
    """Write stores to an ``.npz``; keys are ``<store>/<param>[@m|@v]``, ``<store>/@t``."""
    arrays = {}
    for key, store in stores.items():
        arrays.update(store.state_arrays(prefix=f"{key}/"))
    for key, value in (meta or {}).items():
        arrays[f"meta/{key}"] = np.asarray(value)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> dict[str, np.ndarray]:
    with np.load(path, allow_pickle=False) as data:
        return {k: data[k] for k in data.files}
