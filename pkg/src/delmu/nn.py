"""A small 1-D convolutional surrogate that maps demands to rate allocations.

Pure numpy, double precision, channels-last activations ``(batch, length,
channels)``. Convolutions use kernel 3, stride 1 and zero "same" padding and
are lowered to one matrix product each (im2col).
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError
from .model import DemandInstance

OMEGA = 1.0507
ETA = 1.6733
RATE_SCALE = 750.0
N_TOPOLOGIES = 4
KERNEL = 3

CONV_CHANNELS = (16, 16, 32, 32, 64, 64, 32, 16)
DENSE_WIDTHS = (128, 64)

MAGIC = b"DLMU"
FORMAT_VERSION = 1


def selu(x):
    x = np.asarray(x, dtype=float)
    neg = np.expm1(np.minimum(x, 0.0))
    neg *= ETA
    return OMEGA * np.maximum(x, 0.0) + OMEGA * neg


def selu_grad(x):
    x = np.asarray(x, dtype=float)
    return OMEGA * np.where(x > 0, 1.0, ETA * np.exp(np.minimum(x, 0.0)))


@dataclass
class Conv1D:
    weight: np.ndarray  # (out, in, kernel)
    bias: np.ndarray

    @property
    def shape(self):
        return self.weight.shape


@dataclass
class Dense:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray

    @property
    def shape(self):
        return self.weight.shape


@dataclass
class Surrogate:
    input_length: int
    output_size: int
    layers: list = field(default_factory=list)

    @property
    def conv_layers(self):
        return [l for l in self.layers if isinstance(l, Conv1D)]

    @property
    def dense_layers(self):
        return [l for l in self.layers if isinstance(l, Dense)]

    def parameters(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += [layer.weight, layer.bias]
        return out

    def copy(self) -> "Surrogate":
        return Surrogate(
            self.input_length,
            self.output_size,
            [type(l)(l.weight.copy(), l.bias.copy()) for l in self.layers],
        )

    def validate(self):
        channels = 1
        seen_dense = False
        width = None
        for k, layer in enumerate(self.layers):
            if isinstance(layer, Conv1D):
                if seen_dense:
                    raise DimensionError(f"layer {k}: convolution after dense layer")
                out, cin, ker = layer.weight.shape
                if cin != channels or ker != KERNEL or layer.bias.shape != (out,):
                    raise DimensionError(f"layer {k}: conv shape {layer.weight.shape} breaks the chain")
                channels = out
            else:
                if not seen_dense:
                    width = self.input_length * channels
                    seen_dense = True
                out, cin = layer.weight.shape
                if cin != width or layer.bias.shape != (out,):
                    raise DimensionError(f"layer {k}: dense shape {layer.weight.shape} breaks the chain")
                width = out
        if width != self.output_size:
            raise DimensionError(f"final width {width} != output size {self.output_size}")


def build_model(input_length: int = 2 * 12 + N_TOPOLOGIES, output_size: int = 12,
                conv_channels=CONV_CHANNELS, dense_widths=DENSE_WIDTHS,
                seed=0, zero: bool = False) -> Surrogate:
    """LeCun-normal initialisation (std = 1/sqrt(fan_in)), zero biases."""
    rng = np.random.default_rng(seed)

    def init(shape, fan_in):
        if zero:
            return np.zeros(shape)
        return rng.standard_normal(shape) / np.sqrt(fan_in)

    layers = []
    cin = 1
    for c in conv_channels:
        layers.append(Conv1D(init((c, cin, KERNEL), cin * KERNEL), np.zeros(c)))
        cin = c
    width = input_length * cin
    for w in tuple(dense_widths) + (output_size,):
        layers.append(Dense(init((w, width), width), np.zeros(w)))
        width = w
    model = Surrogate(input_length, output_size, layers)
    model.validate()
    return model


def featurize(instance: DemandInstance, topology_index: int, n_topologies: int = N_TOPOLOGIES) -> np.ndarray:
    """``[min rates | demands]`` row-major, divided by 750, then a topology one-hot."""
    if not 1 <= topology_index <= n_topologies:
        raise ValueError(f"topology index must be 1..{n_topologies}")
    hot = np.zeros(n_topologies)
    hot[topology_index - 1] = 1.0
    return np.concatenate([
        instance.min_rate.ravel() / RATE_SCALE,
        instance.max_demand.ravel() / RATE_SCALE,
        hot,
    ])


class Scratch:
    """Arrays reused across calls with the same shapes, keyed by role.

    Training passes one of these to ``forward`` and ``backward`` so each
    batch writes into the previous batch's buffers instead of allocating.
    Arrays handed out (outputs, cache entries) are overwritten by the next
    call that uses the same scratch.
    """

    def __init__(self):
        self._arrays = {}

    def get(self, key, shape) -> np.ndarray:
        a = self._arrays.get(key)
        if a is None or a.shape != shape:
            a = np.empty(shape)
            self._arrays[key] = a
        return a


def _im2col(h: np.ndarray, cols: np.ndarray | None = None) -> np.ndarray:
    B, L, C = h.shape
    if cols is None:
        cols = np.empty((B, L, 3 * C))
    cols[:, 0, :C] = 0.0
    cols[:, 1:, :C] = h[:, :-1]
    cols[:, :, C:2 * C] = h
    cols[:, :-1, 2 * C:] = h[:, 1:]
    cols[:, -1, 2 * C:] = 0.0
    return cols


def _selu_into(z: np.ndarray, out: np.ndarray, tmp: np.ndarray) -> np.ndarray:
    np.minimum(z, 0.0, out=tmp)
    np.expm1(tmp, out=tmp)
    tmp *= OMEGA * ETA
    np.maximum(z, 0.0, out=out)
    out *= OMEGA
    out += tmp
    return out


def _selu_grad_into(z: np.ndarray, a: np.ndarray, out: np.ndarray) -> np.ndarray:
    # on the negative side selu(z) + omega*eta equals omega*eta*exp(z)
    np.minimum(a, 0.0, out=out)
    out += OMEGA * ETA
    np.copyto(out, OMEGA, where=z > 0)
    return out


def _conv_matrix(weight: np.ndarray) -> np.ndarray:
    out, cin, ker = weight.shape
    return weight.transpose(2, 1, 0).reshape(ker * cin, out)


def forward(model: Surrogate, features, scratch: Scratch | None = None):
    """Returns ``(outputs, cache)``; outputs are in scaled units (x750 = Mbps).

    Accepts one feature vector or a ``(batch, length)`` array.
    """
    x = np.asarray(features, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.input_length:
        raise DimensionError(f"features shape {x.shape[1:]} != ({model.input_length},)")
    buf = (scratch or Scratch()).get
    B = x.shape[0]
    h = x[:, :, None]
    cache = []
    layers = model.layers
    last = len(layers) - 1
    for k, layer in enumerate(layers):
        if isinstance(layer, Conv1D):
            L, cin = h.shape[1:]
            cout = layer.weight.shape[0]
            cols = _im2col(h, buf(("cols", k), (B, L, 3 * cin)))
            z = buf(("z", k), (B, L, cout))
            np.matmul(cols.reshape(B * L, -1), _conv_matrix(layer.weight), out=z.reshape(B * L, -1))
            z += layer.bias
            shape = h.shape
            h = _selu_into(z, buf(("a", k), z.shape), buf(("tmp", z.shape), z.shape))
            cache.append((cols, z, shape, h))
        else:
            if h.ndim == 3:
                h = h.reshape(B, -1)
            z = buf(("z", k), (B, layer.weight.shape[0]))
            np.matmul(h, layer.weight.T, out=z)
            z += layer.bias
            inp = h
            if k != last:
                h = _selu_into(z, buf(("a", k), z.shape), buf(("tmp", z.shape), z.shape))
            else:
                h = z
            cache.append((inp, z, None, h))
    return (h[0] if single else h), cache


def backward(model: Surrogate, cache, target, scratch: Scratch | None = None) -> list[np.ndarray]:
    """Gradients of the mean squared error (mean over batch and outputs),
    ordered like ``model.parameters()``."""
    out = cache[-1][1]
    t = np.asarray(target, dtype=float)
    if t.ndim == 1:
        t = t[None, :]
    if t.shape != out.shape:
        raise DimensionError(f"target shape {t.shape} != output shape {out.shape}")
    buf = (scratch or Scratch()).get
    delta = 2.0 * (out - t) / out.size
    grads: list[np.ndarray] = []
    layers = model.layers
    for k in range(len(layers) - 1, -1, -1):
        layer = layers[k]
        inp, z, in_shape, act = cache[k]
        if k != len(layers) - 1:
            g = _selu_grad_into(z, act, buf(("g", k), z.shape))
            np.multiply(g, delta, out=g)
            delta = g
        if isinstance(layer, Dense):
            gW = delta.T @ inp
            gb = delta.sum(axis=0)
            if k > 0:
                delta = delta @ layer.weight
                if isinstance(layers[k - 1], Conv1D):
                    delta = delta.reshape(cache[k - 1][1].shape)
        else:
            B, L, cin = in_shape
            d2 = delta.reshape(B * L, -1)
            gmat = inp.reshape(B * L, -1).T @ d2
            gW = gmat.reshape(KERNEL, cin, -1).transpose(2, 1, 0)
            gb = d2.sum(axis=0)
            if k > 0:
                dcols = buf(("dcols", k), (B, L, 3 * cin))
                np.matmul(d2, _conv_matrix(layer.weight).T, out=dcols.reshape(B * L, -1))
                dh = buf(("dh", k), in_shape)
                np.copyto(dh, dcols[:, :, cin:2 * cin])
                dh[:, :-1] += dcols[:, 1:, :cin]
                dh[:, 1:] += dcols[:, :-1, 2 * cin:]
                delta = dh
        grads.append(gb)
        grads.append(gW)
    grads.reverse()
    return grads


def mse(outputs, target) -> float:
    return float(np.mean((np.asarray(outputs) - np.asarray(target)) ** 2))


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_model(cls, model: Surrogate) -> "AdamState":
        params = model.parameters()
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(state: AdamState, model: Surrogate, grads, lr: float) -> None:
    """One bias-corrected Adam update, in place on ``model`` and ``state``."""
    state.step += 1
    c1 = 1.0 - state.beta1 ** state.step
    c2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(model.parameters(), grads, state.m, state.v):
        t = np.multiply(g, 1.0 - state.beta1)
        m *= state.beta1
        m += t
        np.multiply(g, g, out=t)
        t *= 1.0 - state.beta2
        v *= state.beta2
        v += t
        np.divide(v, c2, out=t)
        np.sqrt(t, out=t)
        t += state.eps
        np.divide(m, t, out=t)
        t *= lr / c1
        p -= t


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    lr: float = 1e-4
    batch_size: int = 32
    seed: int = 0
    conv_channels: tuple[int, ...] = CONV_CHANNELS
    dense_widths: tuple[int, ...] = DENSE_WIDTHS

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def train(features, labels, config: TrainConfig = TrainConfig(), model: Surrogate | None = None,
          progress=None):
    """Mini-batch Adam on the MSE between outputs and scaled labels.

    ``features`` is ``(Q, length)``, ``labels`` is ``(Q, outputs)`` already
    divided by 750. Returns ``(model, per-epoch mean loss)``.
    """
    X = np.asarray(features, dtype=float)
    Y = np.asarray(labels, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("training set is empty")
    if len(Y) != len(X):
        raise DimensionError("features and labels differ in length")
    rng = np.random.default_rng(config.seed)
    if model is None:
        model = build_model(X.shape[1], Y.shape[1], config.conv_channels,
                            config.dense_widths, seed=rng.integers(2**32))
    state = AdamState.for_model(model)
    scratch = Scratch()
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(X))
        total = 0.0
        for start in range(0, len(X), config.batch_size):
            idx = order[start:start + config.batch_size]
            out, cache = forward(model, X[idx], scratch)
            total += mse(out, Y[idx]) * len(idx)
            adam_step(state, model, backward(model, cache, Y[idx], scratch), config.lr)
        history.append(total / len(X))
        if progress is not None:
            progress(epoch, history[-1])
    return model, np.array(history)


class InferencePlan:
    """Single-sample forward pass over a frozen copy of the weights.

    Buffers are allocated once and each im2col matrix is gathered from a
    strided view of a zero-padded activation buffer, so a call costs one copy,
    one matrix product and a few in-place ufuncs per layer. Rebuild the plan
    after the weights change. ``dtype=np.float32`` trades accuracy of the raw
    output for speed. The buffers are shared, so a plan serves one thread.
    """

    def __init__(self, model: Surrogate, dtype=np.float64):
        model.validate()
        self.dtype = dt = np.dtype(dtype)
        self.input_length = L = model.input_length
        self.output_size = model.output_size
        self._x = np.zeros((L + 2, 1), dtype=dt)
        self._steps = []
        src = self._x
        last = len(model.layers) - 1
        for k, layer in enumerate(model.layers):
            if isinstance(layer, Conv1D):
                out, cin, _ = layer.weight.shape
                dst = np.zeros((L + 2, out), dtype=dt)
                cols = np.lib.stride_tricks.as_strided(
                    src, shape=(L, KERNEL * cin), strides=(cin * src.itemsize, src.itemsize),
                    writeable=False)
                self._steps.append((cols, np.empty(cols.shape, dt), _conv_matrix(layer.weight).astype(dt),
                                    layer.bias.astype(dt), dst[1:-1], np.empty((L, out), dt), True))
                src = dst
            else:
                inp = src[1:-1].reshape(-1) if src.ndim == 2 else src
                dst = np.empty(layer.weight.shape[0], dtype=dt)
                self._steps.append((inp, None, layer.weight.T.astype(dt), layer.bias.astype(dt), dst,
                                    np.empty_like(dst), k != last))
                src = dst
        self._out = src

    def __call__(self, features: np.ndarray) -> np.ndarray:
        x = np.asarray(features)
        if x.shape != (self.input_length,):
            raise DimensionError(f"features shape {x.shape} != ({self.input_length},)")
        self._x[1:-1, 0] = x
        for inp, buf, w, b, z, tmp, act in self._steps:
            if buf is not None:
                np.copyto(buf, inp)
                inp = buf
            np.matmul(inp, w, out=z)
            z += b
            if act:
                np.minimum(z, 0.0, out=tmp)
                np.expm1(tmp, out=tmp)
                tmp *= OMEGA * ETA
                np.maximum(z, 0.0, out=z)
                z *= OMEGA
                z += tmp
        return self._out.astype(float)


def infer(model: Surrogate, instance: DemandInstance, topology_index: int,
          plan: InferencePlan | None = None) -> np.ndarray:
    """Raw rates in Mbps, shaped like the instance. Not necessarily feasible.

    ``plan`` (built from ``model``) skips the general batched forward pass.
    """
    x = featurize(instance, topology_index)
    out = plan(x) if plan is not None else forward(model, x)[0]
    if out.size != instance.min_rate.size:
        raise DimensionError(f"model outputs {out.size} rates, instance has {instance.min_rate.size}")
    return out.reshape(instance.shape) * RATE_SCALE


def save_model(model: Surrogate, path) -> None:
    """Binary container: magic, version, JSON header, little-endian float64
    weight arrays (row-major, weight then bias per layer)."""
    header = {
        "format_version": FORMAT_VERSION,
        "input_length": model.input_length,
        "output_size": model.output_size,
        "selu": [OMEGA, ETA],
        "rate_scale": RATE_SCALE,
        "layers": [
            {"type": "conv" if isinstance(l, Conv1D) else "dense", "weight": list(l.weight.shape)}
            for l in model.layers
        ],
    }
    blob = json.dumps(header).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(blob)))
        fh.write(blob)
        for p in model.parameters():
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_model(path) -> Surrogate:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise ValueError("not a model file")
    version, n = struct.unpack("<II", data[4:12])
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version}")
    header = json.loads(data[12:12 + n])
    offset = 12 + n
    layers = []

    def take(shape):
        nonlocal offset
        count = int(np.prod(shape))
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape)
        offset += 8 * count
        return arr.astype(float)

    for spec in header["layers"]:
        shape = tuple(spec["weight"])
        w = take(shape)
        b = take((shape[0],))
        layers.append(Conv1D(w, b) if spec["type"] == "conv" else Dense(w, b))
    if offset != len(data):
        raise ValueError("trailing bytes in model file")
    model = Surrogate(header["input_length"], header["output_size"], layers)
    model.validate()
    return model
