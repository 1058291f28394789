"""Reward parameterizations over per-state feature rows.

Two families:

* ``LinearReward``: r(s) = theta . f_s.  Its "hidden" representation is the
  raw feature row itself, so failure weights live in feature space.
* ``ConvRewardNet``: a small convolutional network (conv -> batch-norm ->
  rectifier blocks, then two fully connected layers ending in a scalar).
  The hidden representation is the first fully-connected layer's output,
  which is what the failure weights multiply.

The network is written directly in numpy with an exact analytic backward
pass; gradients are verified against central finite differences in the test
suite.  Batch normalization always normalizes with the running statistics
(deterministic evaluation); training sweeps may fold the current batch into
the running statistics via ``update_stats=True``.

The combined reward used once failure weights exist is

    r_combined(s) = r(s) + theta_f . hidden(s)
"""

import io
import json
from dataclasses import dataclass

import numpy as np

from .errors import InputError, TrainingDivergedError

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


class LinearReward:
    """Reward linear in the state features."""

    kind = "linear"

    def __init__(self, feature_dim: int, theta=None):
        self.feature_dim = int(feature_dim)
        if theta is None:
            theta = np.zeros(self.feature_dim)
        self.theta = np.asarray(theta, dtype=np.float64).copy()
        if self.theta.shape != (self.feature_dim,):
            raise InputError("theta must have shape (feature_dim,)")
        if not np.all(np.isfinite(self.theta)):
            raise InputError("theta must be finite")

    @property
    def hidden_dim(self) -> int:
        return self.feature_dim

    def forward(self, rows: np.ndarray, update_stats: bool = False):
        rows = _check_rows(rows, self.feature_dim)
        return rows @ self.theta, rows

    def forward_with_cache(self, rows: np.ndarray, update_stats: bool = False):
        rows = _check_rows(rows, self.feature_dim)
        return rows @ self.theta, rows, rows

    def backward_from_cache(self, cache, upstream: np.ndarray):
        upstream = _check_upstream(upstream, cache.shape[0])
        return {"theta": cache.T @ upstream}

    def backward(self, rows: np.ndarray, upstream: np.ndarray):
        rows = _check_rows(rows, self.feature_dim)
        upstream = _check_upstream(upstream, rows.shape[0])
        return {"theta": rows.T @ upstream}

    def parameters(self):
        return [("theta", self.theta)]

    def state_arrays(self):
        return [("theta", self.theta)]

    def config(self):
        return {"feature_dim": self.feature_dim}

    def copy(self) -> "LinearReward":
        return LinearReward(self.feature_dim, self.theta)


@dataclass
class ConvNetConfig:
    image_shape: tuple          # (channels, height, width)
    conv_channels: tuple = (16, 32, 32)
    fc1_width: int = 64
    kernel_size: int = 3
    extra_dim: int = 0          # flat features appended after the conv stack
    seed: int = 0

    def feature_dim(self) -> int:
        c, h, w = self.image_shape
        return c * h * w + self.extra_dim


def default_grid_net_config(image_shape, seed=0) -> ConvNetConfig:
    return ConvNetConfig(image_shape=tuple(image_shape), conv_channels=(16, 32, 32),
                         fc1_width=64, extra_dim=0, seed=seed)


def default_carpark_net_config(image_shape, extra_dim, seed=0) -> ConvNetConfig:
    # two conv blocks for the smaller two-channel input
    return ConvNetConfig(image_shape=tuple(image_shape), conv_channels=(16, 32),
                         fc1_width=64, extra_dim=int(extra_dim), seed=seed)


class ConvRewardNet:
    """Convolutional reward network with a hand-rolled backward pass."""

    kind = "conv"

    def __init__(self, config: ConvNetConfig, params=None):
        self.cfg = config
        c, h, w = config.image_shape
        k = config.kernel_size
        self.flat_dim = config.conv_channels[-1] * h * w
        self.fc1_in = self.flat_dim + config.extra_dim
        if params is not None:
            self._params = {name: np.array(arr, dtype=np.float64)
                            for name, arr in params.items()}
            return
        rng = np.random.default_rng(config.seed)
        self._params = {}
        in_ch = c
        for i, out_ch in enumerate(config.conv_channels):
            fan_in = in_ch * k * k
            bound = 1.0 / np.sqrt(fan_in)
            self._params[f"conv{i}_w"] = rng.uniform(-bound, bound, (out_ch, in_ch, k, k))
            self._params[f"bn{i}_gamma"] = np.ones(out_ch)
            # a small random shift keeps rectifier inputs off exact zero, where
            # binary images would otherwise pin them at initialization
            self._params[f"bn{i}_beta"] = rng.uniform(-0.1, 0.1, out_ch)
            self._params[f"bn{i}_mean"] = np.zeros(out_ch)
            self._params[f"bn{i}_var"] = np.ones(out_ch)
            in_ch = out_ch
        bound = 1.0 / np.sqrt(self.fc1_in)
        self._params["fc1_w"] = rng.uniform(-bound, bound, (config.fc1_width, self.fc1_in))
        self._params["fc1_b"] = rng.uniform(-bound, bound, config.fc1_width)
        bound = 1.0 / np.sqrt(config.fc1_width)
        self._params["fc2_w"] = rng.uniform(-bound, bound, config.fc1_width)
        self._params["fc2_b"] = rng.uniform(-bound, bound, 1)

    # running statistics are state, not parameters: no gradient flows to them
    _STAT_SUFFIXES = ("_mean", "_var")

    @property
    def hidden_dim(self) -> int:
        return self.cfg.fc1_width

    def parameters(self):
        return [(name, arr) for name, arr in self._params.items()
                if not name.endswith(self._STAT_SUFFIXES)]

    def state_arrays(self):
        """Every array needed to reconstruct the model, running stats included."""
        return list(self._params.items())

    def config(self):
        return {"image_shape": list(self.cfg.image_shape),
                "conv_channels": list(self.cfg.conv_channels),
                "fc1_width": self.cfg.fc1_width,
                "kernel_size": self.cfg.kernel_size,
                "extra_dim": self.cfg.extra_dim,
                "seed": self.cfg.seed}

    def copy(self) -> "ConvRewardNet":
        return ConvRewardNet(self.cfg, params=self._params)

    def _split(self, rows: np.ndarray):
        c, h, w = self.cfg.image_shape
        img_dim = c * h * w
        imgs = rows[:, :img_dim].reshape(rows.shape[0], c, h, w)
        extra = rows[:, img_dim:]
        return imgs, extra

    def forward(self, rows: np.ndarray, update_stats: bool = False):
        rewards, hidden, _ = self._forward(rows, update_stats, need_cache=False)
        return rewards, hidden

    def forward_with_cache(self, rows: np.ndarray, update_stats: bool = False):
        return self._forward(rows, update_stats, need_cache=True)

    def _forward(self, rows: np.ndarray, update_stats: bool, need_cache: bool):
        rows = _check_rows(rows, self.cfg.feature_dim())
        x, extra = self._split(rows)
        k = self.cfg.kernel_size
        cache = []
        for i in range(len(self.cfg.conv_channels)):
            cols = _im2col(x, k)
            w2d = self._params[f"conv{i}_w"].reshape(self.cfg.conv_channels[i], -1)
            conv = np.matmul(w2d, cols).reshape(x.shape[0], -1, x.shape[2], x.shape[3])
            if update_stats:
                mean = conv.mean(axis=(0, 2, 3))
                var = conv.var(axis=(0, 2, 3))
                self._params[f"bn{i}_mean"] *= 1.0 - BN_MOMENTUM
                self._params[f"bn{i}_mean"] += BN_MOMENTUM * mean
                self._params[f"bn{i}_var"] *= 1.0 - BN_MOMENTUM
                self._params[f"bn{i}_var"] += BN_MOMENTUM * var
            mu = self._params[f"bn{i}_mean"][None, :, None, None]
            sig = np.sqrt(self._params[f"bn{i}_var"] + BN_EPS)[None, :, None, None]
            xhat = (conv - mu) / sig
            y = self._params[f"bn{i}_gamma"][None, :, None, None] * xhat \
                + self._params[f"bn{i}_beta"][None, :, None, None]
            if need_cache:
                cache.append((x.shape, cols, xhat, y, sig))
            x = np.maximum(y, 0.0)
        z = np.concatenate([x.reshape(x.shape[0], -1), extra], axis=1)
        hidden = z @ self._params["fc1_w"].T + self._params["fc1_b"]
        h_act = np.maximum(hidden, 0.0)
        rewards = h_act @ self._params["fc2_w"] + self._params["fc2_b"][0]
        if need_cache:
            cache.append((z, hidden, h_act))
        return rewards, hidden, cache

    def backward(self, rows: np.ndarray, upstream: np.ndarray):
        """Gradient of sum_s upstream[s] * reward[s] w.r.t. every parameter."""
        _, _, cache = self._forward(rows, update_stats=False, need_cache=True)
        return self.backward_from_cache(cache, upstream)

    def backward_from_cache(self, cache, upstream: np.ndarray):
        z, hidden, h_act = cache[-1]
        upstream = _check_upstream(upstream, z.shape[0])
        grads = {}
        grads["fc2_w"] = h_act.T @ upstream
        grads["fc2_b"] = np.array([upstream.sum()])
        d_hact = np.outer(upstream, self._params["fc2_w"])
        d_hidden = d_hact * (hidden > 0.0)
        grads["fc1_w"] = d_hidden.T @ z
        grads["fc1_b"] = d_hidden.sum(axis=0)
        d_z = d_hidden @ self._params["fc1_w"]
        d_x = d_z[:, :self.flat_dim]
        k = self.cfg.kernel_size
        for i in reversed(range(len(self.cfg.conv_channels))):
            x_shape, cols, xhat, y, sig = cache[i]
            n = x_shape[0]
            ch = self.cfg.conv_channels[i]
            d_y = d_x.reshape(n, ch, x_shape[2], x_shape[3]) * (y > 0.0)
            grads[f"bn{i}_gamma"] = (d_y * xhat).sum(axis=(0, 2, 3))
            grads[f"bn{i}_beta"] = d_y.sum(axis=(0, 2, 3))
            d_conv = d_y * (self._params[f"bn{i}_gamma"][None, :, None, None] / sig)
            d_conv2d = d_conv.reshape(n, ch, -1)
            w2d = self._params[f"conv{i}_w"].reshape(ch, -1)
            # one dgemm over the flattened batch instead of a per-sample einsum
            d_flat = d_conv2d.transpose(1, 0, 2).reshape(ch, -1)
            c_flat = cols.transpose(1, 0, 2).reshape(cols.shape[1], -1)
            grads[f"conv{i}_w"] = (d_flat @ c_flat.T).reshape(
                self._params[f"conv{i}_w"].shape)
            d_cols = np.matmul(w2d.T, d_conv2d)
            d_x = _col2im(d_cols, x_shape, k).reshape(n, -1)
        return grads


def _check_rows(rows, feature_dim):
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != feature_dim:
        raise InputError(
            f"feature rows must have shape (num_states, {feature_dim}), got {rows.shape}")
    return rows


def _check_upstream(upstream, num_states):
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (num_states,):
        raise InputError("upstream must be a vector with one entry per state")
    return upstream


def _im2col(x, k):
    n, c, h, w = x.shape
    p = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(2, 3))
    # (n, c, h, w, k, k) -> (n, c*k*k, h*w) with (c, ky, kx) as the row index
    return win.transpose(0, 1, 4, 5, 2, 3).reshape(n, c * k * k, h * w)


def _col2im(d_cols, x_shape, k):
    n, c, h, w = x_shape
    p = k // 2
    dxp = np.zeros((n, c, h + 2 * p, w + 2 * p))
    idx = 0
    for ch in range(c):
        for di in range(k):
            for dj in range(k):
                dxp[:, ch, di:di + h, dj:dj + w] += d_cols[:, idx, :].reshape(n, h, w)
                idx += 1
    return dxp[:, :, p:p + h, p:p + w]


# ---------------------------------------------------------------------------
# module-level operations shared by both model families
# ---------------------------------------------------------------------------

def reward_forward(model, features):
    """Per-state rewards and hidden representations (deterministic)."""
    return model.forward(features.features, update_stats=False)


def combined_reward(model, theta_f, features) -> np.ndarray:
    """Base reward plus the failure-weight correction theta_f . hidden(s)."""
    rewards, hidden = model.forward(features.features, update_stats=False)
    if theta_f is None:
        return rewards
    theta_f = np.asarray(theta_f, dtype=np.float64)
    if theta_f.shape != (hidden.shape[1],):
        raise InputError(
            f"theta_f must have length {hidden.shape[1]}, got {theta_f.shape}")
    return rewards + hidden @ theta_f


def reward_backward(model, features, upstream):
    return model.backward(features.features, upstream)


def apply_gradient_step(model, gradient, learning_rate: float):
    """In-place theta <- theta - lr * grad; rejects non-finite gradients."""
    for name, arr in model.parameters():
        g = gradient[name]
        if not np.all(np.isfinite(g)):
            raise TrainingDivergedError(-1, f"non-finite gradient for {name}")
        arr -= learning_rate * g
    return model


def zero_failure_weights(model) -> np.ndarray:
    return np.zeros(model.hidden_dim)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------
#
# Self-describing binary container (documented in the README):
#   bytes 0..7   magic "SGIRLCK1"
#   8..11        uint32 little-endian header length L
#   12..12+L     UTF-8 JSON header: {"version", "kind", "config",
#                "arrays": [{"name", "dtype", "shape"}, ...],
#                "has_theta_f"}
#   then the raw little-endian array bytes concatenated in header order.
# Round-trips are bit-exact; no timestamps or other nondeterminism.

_MAGIC = b"SGIRLCK1"


def checkpoint_bytes(model, theta_f=None) -> bytes:
    arrays = list(model.state_arrays())
    if theta_f is not None:
        arrays.append(("theta_f", np.asarray(theta_f, dtype=np.float64)))
    header = {
        "version": 1,
        "kind": model.kind,
        "config": model.config(),
        "arrays": [{"name": n, "dtype": str(a.dtype), "shape": list(a.shape)}
                   for n, a in arrays],
        "has_theta_f": theta_f is not None,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    out = io.BytesIO()
    out.write(_MAGIC)
    out.write(len(blob).to_bytes(4, "little"))
    out.write(blob)
    for _, a in arrays:
        out.write(np.ascontiguousarray(a).tobytes())
    return out.getvalue()


def save_checkpoint(path, model, theta_f=None):
    with open(path, "wb") as f:
        f.write(checkpoint_bytes(model, theta_f))


def load_checkpoint_bytes(data: bytes):
    f = io.BytesIO(data)
    if f.read(8) != _MAGIC:
        raise InputError("not a reward checkpoint")
    length = int.from_bytes(f.read(4), "little")
    header = json.loads(f.read(length).decode("utf-8"))
    arrays = {}
    for meta in header["arrays"]:
        count = int(np.prod(meta["shape"])) if meta["shape"] else 1
        dtype = np.dtype(meta["dtype"])
        buf = f.read(count * dtype.itemsize)
        arrays[meta["name"]] = np.frombuffer(buf, dtype=dtype).reshape(
            meta["shape"]).copy()
    theta_f = arrays.pop("theta_f", None) if header["has_theta_f"] else None
    if header["kind"] == "linear":
        model = LinearReward(header["config"]["feature_dim"], arrays["theta"])
    elif header["kind"] == "conv":
        cfg = header["config"]
        model = ConvRewardNet(
            ConvNetConfig(image_shape=tuple(cfg["image_shape"]),
                          conv_channels=tuple(cfg["conv_channels"]),
                          fc1_width=cfg["fc1_width"], kernel_size=cfg["kernel_size"],
                          extra_dim=cfg["extra_dim"], seed=cfg["seed"]),
            params=arrays)
    else:
        raise InputError(f"unknown checkpoint kind {header['kind']!r}")
    return model, theta_f


def load_checkpoint(path):
    with open(path, "rb") as f:
        return load_checkpoint_bytes(f.read())
