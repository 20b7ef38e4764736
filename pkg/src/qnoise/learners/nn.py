"""Dense and convolutional regressors over token grids, in plain numpy.

Both models start from a learnable embedding table of ``vocab_size + 1`` rows
by ``embed_dim`` columns. Row 0 is the padding token: it stays at zero and is
never updated. Everything runs in float64.

dense:  embed -> flatten (depth, qubit, embed) -> 80 -> 40 -> 1
cnn:    embed as channels -> conv3x3(16) -> ReLU -> maxpool 2x2 (odd edge
        dropped) -> conv3x3(16) -> ReLU -> flatten (channel, row, col)
        -> 80 -> 40 -> 1

Hidden layers use ReLU; the output is linear. Parameters are saved as named
arrays in the order of ``param_names()``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import InvalidArgument, NumericError
from ..features import GRID_DEPTH, GRID_QUBITS
from ..rng import permutation, splitmix64, uniforms
from .base import Regressor, register
from .optim import AdamState, adam_step, lr_schedule

ARCHS = ("dense", "cnn")


@dataclass
class NnConfig:
    embed_dim: int = 3
    widths: tuple[int, ...] = (80, 40, 1)
    conv_channels: int = 16
    conv_layers: int = 2
    epochs: int = 100
    batch_size: int = 64
    lr0: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    vocab_size: int = 10
    grid_depth: int = GRID_DEPTH
    grid_qubits: int = GRID_QUBITS

    def __post_init__(self):
        self.widths = tuple(int(w) for w in self.widths)
        if self.embed_dim < 1:
            raise InvalidArgument("embed_dim must be >= 1")
        if not self.widths or self.widths[-1] != 1:
            raise InvalidArgument("dense widths must end in 1")
        if self.conv_layers != 2:
            raise InvalidArgument("the cnn has exactly two conv layers")
        if self.epochs < 0 or self.batch_size < 1 or self.lr0 <= 0:
            raise InvalidArgument("bad training hyperparameters")


# --- layer kernels -----------------------------------------------------------

def conv3x3(x: np.ndarray, w: np.ndarray, b: np.ndarray | None = None):
    """Same-padded 3x3 correlation. x: (B, C, H, W), w: (O, C, 3, 3)."""
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    win = sliding_window_view(xp, (3, 3), axis=(2, 3))  # (B, C, H, W, 3, 3)
    out = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    if b is not None:
        out = out + b[None, :, None, None]
    return np.ascontiguousarray(out), win


def conv3x3_backward(dout: np.ndarray, win: np.ndarray, w: np.ndarray):
    dw = np.tensordot(dout, win, axes=([0, 2, 3], [0, 2, 3]))
    db = dout.sum(axis=(0, 2, 3))
    w_flip = w[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
    dx, _ = conv3x3(dout, w_flip)
    return dx, dw, db


def maxpool2(x: np.ndarray, arg: np.ndarray | None = None):
    """2x2/stride-2 max pool; returns (out, argmax-in-window). Odd trailing rows/cols are dropped."""
    B, C, H, W = x.shape
    h2, w2 = H // 2, W // 2
    r = x[:, :, :2 * h2, :2 * w2].reshape(B, C, h2, 2, w2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(B, C, h2, w2, 4)
    if arg is None:
        arg = r.argmax(axis=-1)
    out = np.take_along_axis(r, arg[..., None], axis=-1)[..., 0]
    return out, arg


def maxpool2_backward(dout: np.ndarray, arg: np.ndarray, shape) -> np.ndarray:
    B, C, H, W = shape
    h2, w2 = H // 2, W // 2
    dr = np.zeros((B, C, h2, w2, 4))
    np.put_along_axis(dr, arg[..., None], dout[..., None], axis=-1)
    dx = np.zeros(shape)
    dx[:, :, :2 * h2, :2 * w2] = dr.reshape(B, C, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(B, C, 2 * h2, 2 * w2)
    return dx


def _relu(pre: np.ndarray, mask: np.ndarray | None):
    if mask is None:
        mask = pre > 0
    return pre * mask, mask


# --- model -------------------------------------------------------------------

class _GridNet(Regressor):
    featurization = "grid"
    arch = ""

    def __init__(self, config: NnConfig | None = None, **overrides):
        super().__init__()
        self.config = config if config is not None else NnConfig(**overrides)
        self.params: dict[str, np.ndarray] = {}
        self.loss_history: list[float] = []

    # shapes / init
    def _flat_dim(self) -> int:
        c = self.config
        if self.arch == "dense":
            return c.grid_depth * c.grid_qubits * c.embed_dim
        return c.conv_channels * (c.grid_depth // 2) * (c.grid_qubits // 2)

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        c = self.config
        shapes = {"embedding": (c.vocab_size + 1, c.embed_dim)}
        if self.arch == "cnn":
            shapes["conv0.w"] = (c.conv_channels, c.embed_dim, 3, 3)
            shapes["conv0.b"] = (c.conv_channels,)
            shapes["conv1.w"] = (c.conv_channels, c.conv_channels, 3, 3)
            shapes["conv1.b"] = (c.conv_channels,)
        fan_in = self._flat_dim()
        for i, width in enumerate(c.widths):
            shapes[f"dense{i}.w"] = (fan_in, width)
            shapes[f"dense{i}.b"] = (width,)
            fan_in = width
        return shapes

    def param_names(self) -> list[str]:
        return list(self.param_shapes())

    def init_params(self, seed: int) -> None:
        self.params = {}
        for gi, (name, shape) in enumerate(self.param_shapes().items()):
            size = math.prod(shape)
            u = uniforms(splitmix64(seed ^ (0x1000 + gi)), size).reshape(shape) * 2.0 - 1.0
            if name == "embedding":
                p = 0.05 * u
                p[0] = 0.0
            elif name.endswith(".b"):
                p = np.zeros(shape)
            else:
                if len(shape) == 4:
                    fan_in, fan_out = shape[1] * 9, shape[0] * 9
                else:
                    fan_in, fan_out = shape
                p = math.sqrt(6.0 / (fan_in + fan_out)) * u
            self.params[name] = p

    def parameter_count(self) -> int:
        """Trainable scalars; the frozen padding row of the embedding is excluded."""
        total = sum(math.prod(s) for s in self.param_shapes().values())
        return total - self.config.embed_dim

    # forward / backward
    def forward(self, tokens: np.ndarray, params=None, masks=None):
        """Return (predictions, cache). Passing ``masks`` from an earlier
        cache replays that ReLU/max-pool routing instead of recomputing it."""
        p = self.params if params is None else params
        c = self.config
        cache = {"tokens": tokens}
        new_masks = {}
        emb = p["embedding"][tokens]  # (B, D, Q, E)
        if self.arch == "dense":
            h = emb.reshape(tokens.shape[0], -1)
        else:
            x0 = emb.transpose(0, 3, 1, 2)
            a0, win0 = conv3x3(x0, p["conv0.w"], p["conv0.b"])
            r0, new_masks["relu_c0"] = _relu(a0, None if masks is None else masks["relu_c0"])
            pooled, new_masks["pool"] = maxpool2(r0, None if masks is None else masks["pool"])
            a1, win1 = conv3x3(pooled, p["conv1.w"], p["conv1.b"])
            r1, new_masks["relu_c1"] = _relu(a1, None if masks is None else masks["relu_c1"])
            cache.update(win0=win0, win1=win1, r0_shape=r0.shape, pooled_shape=pooled.shape, r1_shape=r1.shape)
            h = r1.reshape(tokens.shape[0], -1)
        acts = [h]
        n_layers = len(c.widths)
        for i in range(n_layers):
            z = acts[-1] @ p[f"dense{i}.w"] + p[f"dense{i}.b"]
            if i < n_layers - 1:
                key = f"relu_d{i}"
                z, new_masks[key] = _relu(z, None if masks is None else masks[key])
            acts.append(z)
        cache["acts"] = acts
        cache["masks"] = new_masks
        return acts[-1][:, 0], cache

    def backward(self, dpred: np.ndarray, cache, params=None) -> dict[str, np.ndarray]:
        p = self.params if params is None else params
        c = self.config
        masks = cache["masks"]
        acts = cache["acts"]
        grads = {}
        d = dpred[:, None]
        for i in reversed(range(len(c.widths))):
            if i < len(c.widths) - 1:
                d = d * masks[f"relu_d{i}"]
            grads[f"dense{i}.w"] = acts[i].T @ d
            grads[f"dense{i}.b"] = d.sum(axis=0)
            d = d @ p[f"dense{i}.w"].T
        tokens = cache["tokens"]
        B = tokens.shape[0]
        if self.arch == "dense":
            demb = d.reshape(B, c.grid_depth, c.grid_qubits, c.embed_dim)
        else:
            d1 = d.reshape(cache["r1_shape"]) * masks["relu_c1"]
            dpool, grads["conv1.w"], grads["conv1.b"] = conv3x3_backward(d1, cache["win1"], p["conv1.w"])
            d0 = maxpool2_backward(dpool, masks["pool"], cache["r0_shape"]) * masks["relu_c0"]
            dx0, grads["conv0.w"], grads["conv0.b"] = conv3x3_backward(d0, cache["win0"], p["conv0.w"])
            demb = dx0.transpose(0, 2, 3, 1)
        flat_tok = tokens.reshape(-1)
        flat_d = demb.reshape(-1, c.embed_dim)
        gemb = np.stack([np.bincount(flat_tok, weights=flat_d[:, e], minlength=c.vocab_size + 1)
                         for e in range(c.embed_dim)], axis=1)
        gemb[0] = 0.0
        grads["embedding"] = gemb
        return grads

    def loss(self, tokens, y, params=None, masks=None) -> float:
        pred, _ = self.forward(tokens, params, masks)
        return float(np.mean((pred - y) ** 2))

    def loss_and_grads(self, tokens, y, params=None, masks=None):
        pred, cache = self.forward(tokens, params, masks)
        r = pred - y
        loss = float(np.mean(r * r))
        grads = self.backward(2.0 * r / r.size, cache, params)
        return loss, grads, cache

    # Regressor hooks
    def _check_x(self, X):
        X = np.asarray(X)
        c = self.config
        if X.ndim != 3 or X.shape[1:] != (c.grid_depth, c.grid_qubits):
            raise InvalidArgument(f"expected token grids of shape (N, {c.grid_depth}, {c.grid_qubits}), got {X.shape}")
        if X.size and (X.min() < 0 or X.max() > c.vocab_size):
            raise InvalidArgument(f"tokens must lie in 0..{c.vocab_size}")
        return X.astype(np.int64, copy=False)

    def _fit(self, X, y, seed):
        c = self.config
        self.init_params(seed)
        state = AdamState(c.beta1, c.beta2, c.eps)
        self.loss_history = []
        n = X.shape[0]
        for epoch in range(c.epochs):
            lr = lr_schedule(epoch, c.lr0)
            order = permutation(splitmix64(seed ^ (0x2000 + epoch)), n)
            total = 0.0
            for start in range(0, n, c.batch_size):
                idx = order[start:start + c.batch_size]
                loss, grads, _ = self.loss_and_grads(X[idx], y[idx])
                if not math.isfinite(loss):
                    raise NumericError(f"{self.algorithm}: loss became non-finite at epoch {epoch}")
                adam_step(self.params, grads, state, lr)
                total += loss * idx.size
            self.loss_history.append(total / n)

    def _predict(self, X):
        out = np.empty(X.shape[0])
        for start in range(0, X.shape[0], 512):
            out[start:start + 512], _ = self.forward(X[start:start + 512])
        return out

    def _state(self):
        return {"arch": self.arch, "config": asdict(self.config),
                "params": {k: {"shape": list(v.shape), "data": v.reshape(-1).tolist()} for k, v in self.params.items()}}

    def _load_state(self, state):
        cfg = dict(state["config"])
        cfg["widths"] = tuple(cfg["widths"])
        self.config = NnConfig(**cfg)
        self.loss_history = []
        self.params = {k: np.asarray(v["data"], dtype=np.float64).reshape(v["shape"])
                       for k, v in state["params"].items()}


@register
class DenseNet(_GridNet):
    algorithm = "dense"
    arch = "dense"


@register
class ConvNet(_GridNet):
    algorithm = "cnn"
    arch = "cnn"


def nn_fit(grids, y, config: NnConfig | None = None, arch: str = "dense", seed: int = 0) -> _GridNet:
    if arch not in ARCHS:
        raise InvalidArgument(f"unknown architecture '{arch}'; valid: {', '.join(ARCHS)}")
    cls = DenseNet if arch == "dense" else ConvNet
    return cls(config).fit(grids, y, seed)


def gradient_check(model: _GridNet, tokens, y, step: float = 1e-5, per_group: int = 12, seed: int = 0) -> float:
    """Max relative error between backprop and central differences of the MSE loss.

    Every parameter group is probed at ``per_group`` seeded coordinates (all
    of them for small groups); embedding row 0 is skipped as it is frozen.
    The ReLU/max-pool routing of the unperturbed pass is held fixed while
    differencing, so a coordinate whose nudge would cross a kink measures the
    slope of the active linear piece instead of a meaningless average.
    """
    tokens = model._check_x(tokens)
    y = np.asarray(y, dtype=np.float64)
    if tokens.shape[0] == 0:
        raise InvalidArgument("gradient_check needs a nonempty batch")
    if not model.params:
        model.init_params(seed)
    _, grads, cache = model.loss_and_grads(tokens, y)
    masks = cache["masks"]
    worst = 0.0
    for gi, name in enumerate(model.param_names()):
        p = model.params[name]
        flat = p.reshape(-1)
        candidates = np.arange(flat.size)
        if name == "embedding":
            candidates = candidates[candidates >= model.config.embed_dim]
        if candidates.size > per_group:
            candidates = candidates[permutation(splitmix64(seed ^ gi), candidates.size)[:per_group]]
        for i in candidates:
            orig = flat[i]
            flat[i] = orig + step
            lp = model.loss(tokens, y, masks=masks)
            flat[i] = orig - step
            lm = model.loss(tokens, y, masks=masks)
            flat[i] = orig
            numeric = (lp - lm) / (2 * step)
            analytic = grads[name].reshape(-1)[i]
            denom = max(abs(numeric), abs(analytic), 1e-6)
            worst = max(worst, abs(numeric - analytic) / denom)
    return worst
