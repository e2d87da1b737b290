"""Fused multi-rate network: one temporal branch per frequency subset.

Each branch zero-substitutes masked inputs, runs an LSTM stack or a stack of
temporal blocks, zeroes outputs at masked time steps and keeps the last valid
step. The branch vectors (plus an optional feed-forward encoding of the
static matrix) are concatenated and reduced to one logit.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..bundle import SUBSETS, SubsetTensorBundle
from ..exceptions import SchemaError, ShapeError
from ..tensorcore import (
    activation_backward,
    activation_forward,
    batchnorm_backward,
    batchnorm_forward,
    conv1d_causal_backward,
    conv1d_causal_forward,
    dropout_backward,
    dropout_forward,
    init_kaiming_normal,
    init_uniform,
    linear_backward,
    linear_forward,
    lstm_backward,
    lstm_forward,
    sigmoid,
)


@dataclass
class FusedSpec:
    family: str
    branch_features: tuple[int, int, int]
    branch_steps: tuple[int, int, int] = (4, 7, 13)
    hidden_dim: int = 32
    layer_dim: int = 1
    num_channels: tuple[int, ...] = (16, 32)
    kernel_size: int = 3
    dropout_prob: float = 0.0
    static_dim: int = 0
    ffnn_layers: int = 1
    ffnn_units: int = 32
    ffnn_activation: str = "relu"
    ffnn_dropout: float = 0.0

    def __post_init__(self):
        if self.family not in ("lstm", "tcn"):
            raise ValueError(f"family must be 'lstm' or 'tcn', got {self.family!r}")
        self.branch_features = tuple(int(v) for v in self.branch_features)
        self.branch_steps = tuple(int(v) for v in self.branch_steps)
        self.num_channels = tuple(int(v) for v in self.num_channels)
        if len(self.branch_features) != 3:
            raise ValueError("exactly three temporal branches are required")
        if not 0.0 <= self.dropout_prob < 1.0 or not 0.0 <= self.ffnn_dropout < 1.0:
            raise ValueError("dropout rates must lie in [0, 1)")

    @property
    def fusion_width(self) -> int:
        # zero-width branches still occupy a (zero) slot so the width is fixed
        return self.hidden_dim * (3 + (1 if self.static_dim else 0))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "FusedSpec":
        return cls(**d)


def last_valid_output(outputs, step_mask):
    """Per patient, the output at the last step whose mask is true (zeros if none).

    Returns the (batch, hidden) selection and the chosen index per patient,
    ``-1`` where no step is valid.
    """
    B, T, _ = outputs.shape
    step_mask = np.asarray(step_mask, dtype=bool)[:, :T]
    any_valid = step_mask.any(axis=1)
    last = np.where(any_valid, T - 1 - np.argmax(step_mask[:, ::-1], axis=1), -1)
    picked = np.zeros((B, outputs.shape[2]))
    rows = np.nonzero(any_valid)[0]
    picked[rows] = outputs[rows, last[rows]]
    return picked, last


def split_inputs(bundle: SubsetTensorBundle):
    """NaN-free inputs and per-step masks for each branch."""
    out = []
    for name in SUBSETS:
        sub = bundle.subsets[name]
        if (np.isnan(sub.values) & sub.mask).any():
            raise SchemaError(f"subset {name!r}: NaN at a position marked observed")
        x = np.where(sub.mask, sub.values, 0.0)
        out.append((x, sub.mask.any(axis=2)))
    return out


class FusedNetwork:
    """Parameters, batch-norm buffers and analytic forward/backward passes."""

    def __init__(self, spec: FusedSpec, seed=0, params=None, buffers=None):
        self.spec = spec
        if params is None:
            params, buffers = self._init(np.random.default_rng(seed))
        self.params: dict[str, np.ndarray] = params
        self.buffers: dict[str, np.ndarray] = buffers or {}

    # ------------------------------------------------------------------ init
    def _init(self, rng):
        s = self.spec
        p: dict[str, np.ndarray] = {}
        buf: dict[str, np.ndarray] = {}
        H = s.hidden_dim
        for name, n_in in zip(SUBSETS, s.branch_features):
            if n_in == 0:
                continue
            if s.family == "lstm":
                f = n_in
                for layer in range(s.layer_dim):
                    pre = f"{name}.lstm{layer}"
                    p[f"{pre}.W_ih"] = init_uniform((4 * H, f), H, rng)
                    p[f"{pre}.W_hh"] = init_uniform((4 * H, H), H, rng)
                    p[f"{pre}.b"] = init_uniform((4 * H,), H, rng)
                    f = H
            else:
                c_in = n_in
                k = s.kernel_size
                for i, c_out in enumerate(s.num_channels):
                    pre = f"{name}.block{i}"
                    for conv, ci in (("conv1", c_in), ("conv2", c_out)):
                        p[f"{pre}.{conv}.W"] = init_kaiming_normal((c_out, ci, k), ci * k, rng)
                        p[f"{pre}.{conv}.b"] = np.zeros(c_out)
                    for bn in ("bn1", "bn2"):
                        p[f"{pre}.{bn}.gamma"] = np.ones(c_out)
                        p[f"{pre}.{bn}.beta"] = np.zeros(c_out)
                        buf[f"{pre}.{bn}.mean"] = np.zeros(c_out)
                        buf[f"{pre}.{bn}.var"] = np.ones(c_out)
                    if c_in != c_out:
                        p[f"{pre}.down.W"] = init_kaiming_normal((c_out, c_in, 1), c_in, rng)
                        p[f"{pre}.down.b"] = np.zeros(c_out)
                    c_in = c_out
                p[f"{name}.proj.W"] = init_kaiming_normal((H, c_in, 1), c_in, rng)
                p[f"{name}.proj.b"] = np.zeros(H)
        if s.static_dim:
            width = s.static_dim
            for j in range(s.ffnn_layers):
                p[f"static.fc{j}.W"] = init_uniform((s.ffnn_units, width), width, rng)
                p[f"static.fc{j}.b"] = init_uniform((s.ffnn_units,), width, rng)
                width = s.ffnn_units
            p["static.proj.W"] = init_uniform((H, width), width, rng)
            p["static.proj.b"] = init_uniform((H,), width, rng)
        width = H * (3 + (1 if s.static_dim else 0))
        p["fuse.W"] = init_uniform((1, width), width, rng)
        p["fuse.b"] = np.zeros(1)
        return p, buf

    # ------------------------------------------------------------- branches
    def _lstm_branch(self, name, x, train, rng):
        layers = [{k: self.params[f"{name}.lstm{i}.{k}"] for k in ("W_ih", "W_hh", "b")}
                  for i in range(self.spec.layer_dim)]
        hs, cache = lstm_forward(x, layers, self.spec.dropout_prob, rng, train)
        return hs, cache

    def _lstm_branch_backward(self, name, dhs, cache, grads):
        _, layer_grads = lstm_backward(dhs, cache)
        for i, g in enumerate(layer_grads):
            for k, v in g.items():
                grads[f"{name}.lstm{i}.{k}"] = v

    def temporal_block_forward(self, pre, x, dilation, train, rng, new_buffers):
        p = self.params
        caches = {}
        h = x
        for conv, bn, drop in (("conv1", "bn1", "drop1"), ("conv2", "bn2", "drop2")):
            h, caches[conv] = conv1d_causal_forward(h, p[f"{pre}.{conv}.W"], p[f"{pre}.{conv}.b"], dilation)
            h, caches[conv + "_act"] = activation_forward("relu", h)
            h, caches[bn], m, v = batchnorm_forward(
                h, p[f"{pre}.{bn}.gamma"], p[f"{pre}.{bn}.beta"],
                self.buffers[f"{pre}.{bn}.mean"], self.buffers[f"{pre}.{bn}.var"], train)
            new_buffers[f"{pre}.{bn}.mean"] = m
            new_buffers[f"{pre}.{bn}.var"] = v
            h, caches[drop] = dropout_forward(h, self.spec.dropout_prob, rng, train)
        if f"{pre}.down.W" in p:
            res, caches["down"] = conv1d_causal_forward(x, p[f"{pre}.down.W"], p[f"{pre}.down.b"], 1)
        else:
            res = x
        return h + res, caches

    def temporal_block_backward(self, pre, dy, caches, grads):
        dh = dy
        for conv, bn, drop in (("conv2", "bn2", "drop2"), ("conv1", "bn1", "drop1")):
            dh = dropout_backward(dh, caches[drop])
            dh, grads[f"{pre}.{bn}.gamma"], grads[f"{pre}.{bn}.beta"] = batchnorm_backward(dh, caches[bn])
            dh = activation_backward(dh, caches[conv + "_act"])
            dh, grads[f"{pre}.{conv}.W"], grads[f"{pre}.{conv}.b"] = conv1d_causal_backward(dh, caches[conv])
        if "down" in caches:
            dres, grads[f"{pre}.down.W"], grads[f"{pre}.down.b"] = conv1d_causal_backward(dy, caches["down"])
        else:
            dres = dy
        return dh + dres

    def _tcn_branch(self, name, x, train, rng, new_buffers):
        h = np.transpose(x, (0, 2, 1))
        caches = []
        for i in range(len(self.spec.num_channels)):
            h, c = self.temporal_block_forward(f"{name}.block{i}", h, 2 ** i, train, rng, new_buffers)
            caches.append(c)
        h, proj_cache = conv1d_causal_forward(h, self.params[f"{name}.proj.W"], self.params[f"{name}.proj.b"], 1)
        return np.transpose(h, (0, 2, 1)), (caches, proj_cache)

    def _tcn_branch_backward(self, name, dhs, cache, grads):
        caches, proj_cache = cache
        d = np.transpose(dhs, (0, 2, 1))
        d, grads[f"{name}.proj.W"], grads[f"{name}.proj.b"] = conv1d_causal_backward(d, proj_cache)
        for i in reversed(range(len(caches))):
            d = self.temporal_block_backward(f"{name}.block{i}", d, caches[i], grads)
        return d

    def branch_outputs(self, name, x, train=False, rng=None, new_buffers=None):
        """Raw per-step outputs of one branch, shape (batch, steps, hidden)."""
        new_buffers = {} if new_buffers is None else new_buffers
        if self.spec.family == "lstm":
            return self._lstm_branch(name, x, train, rng)
        return self._tcn_branch(name, x, train, rng, new_buffers)

    # ------------------------------------------------------------ full model
    def _check_inputs(self, inputs, static):
        s = self.spec
        for (x, step_mask), name, f, t in zip(inputs, SUBSETS, s.branch_features, s.branch_steps):
            if x.ndim != 3 or x.shape[2] != f or x.shape[1] != t:
                raise ShapeError(
                    f"branch {name!r}: expected (batch, {t}, {f}) input, got {x.shape}")
        if s.static_dim:
            if static is None or static.ndim != 2 or static.shape[1] != s.static_dim:
                got = None if static is None else static.shape
                raise ShapeError(f"static: expected (batch, {s.static_dim}), got {got}")

    def forward(self, inputs, static=None, train=False, rng=None):
        """Logits for a batch.

        Args:
            inputs: three ``(x, step_mask)`` pairs as produced by ``split_inputs``.
            static: (batch, static_dim) matrix when the static branch is enabled.
            train: enables dropout and batch statistics; running statistics
                are updated in place after the pass.
        """
        self._check_inputs(inputs, static)
        s = self.spec
        H = s.hidden_dim
        B = inputs[0][0].shape[0]
        new_buffers: dict[str, np.ndarray] = {}
        pieces, cache = [], {"branches": []}
        for (x, step_mask), name, f in zip(inputs, SUBSETS, s.branch_features):
            if f == 0:
                pieces.append(np.zeros((B, H)))
                cache["branches"].append(None)
                continue
            hs, bcache = self.branch_outputs(name, x, train, rng, new_buffers)
            masked = hs * step_mask[:, :, None]
            picked, last = last_valid_output(masked, step_mask)
            pieces.append(picked)
            cache["branches"].append((bcache, last, hs.shape))
        if s.static_dim:
            h = static
            st_caches = []
            for j in range(s.ffnn_layers):
                h, c1 = linear_forward(h, self.params[f"static.fc{j}.W"], self.params[f"static.fc{j}.b"])
                h, c2 = activation_forward(s.ffnn_activation, h)
                h, c3 = dropout_forward(h, s.ffnn_dropout, rng, train)
                st_caches.append((c1, c2, c3))
            h, cp = linear_forward(h, self.params["static.proj.W"], self.params["static.proj.b"])
            pieces.append(h)
            cache["static"] = (st_caches, cp)
        z = np.concatenate(pieces, axis=1)
        logit, cache["fuse"] = linear_forward(z, self.params["fuse.W"], self.params["fuse.b"])
        if train:
            self.buffers.update(new_buffers)
        return logit[:, 0], cache

    def backward(self, dlogit, cache):
        s = self.spec
        H = s.hidden_dim
        grads: dict[str, np.ndarray] = {}
        dz, grads["fuse.W"], grads["fuse.b"] = linear_backward(dlogit[:, None], cache["fuse"])
        for i, (name, bc) in enumerate(zip(SUBSETS, cache["branches"])):
            if bc is None:
                continue
            bcache, last, shape = bc
            dpicked = dz[:, i * H:(i + 1) * H]
            dhs = np.zeros(shape)
            rows = np.nonzero(last >= 0)[0]
            dhs[rows, last[rows]] = dpicked[rows]
            if s.family == "lstm":
                self._lstm_branch_backward(name, dhs, bcache, grads)
            else:
                self._tcn_branch_backward(name, dhs, bcache, grads)
        if s.static_dim:
            st_caches, cp = cache["static"]
            dh, grads["static.proj.W"], grads["static.proj.b"] = linear_backward(dz[:, 3 * H:], cp)
            for j in reversed(range(s.ffnn_layers)):
                c1, c2, c3 = st_caches[j]
                dh = dropout_backward(dh, c3)
                dh = activation_backward(dh, c2)
                dh, grads[f"static.fc{j}.W"], grads[f"static.fc{j}.b"] = linear_backward(dh, c1)
        return grads

    def predict_logits(self, bundle: SubsetTensorBundle, batch_size: int = 512):
        inputs = split_inputs(bundle)
        static = bundle.static if self.spec.static_dim else None
        out = []
        for start in range(0, len(bundle), batch_size):
            sl = slice(start, start + batch_size)
            batch = [(x[sl], m[sl]) for x, m in inputs]
            logit, _ = self.forward(batch, None if static is None else static[sl], train=False)
            out.append(logit)
        return np.concatenate(out) if out else np.zeros(0)

    def predict_proba(self, bundle: SubsetTensorBundle):
        return sigmoid(self.predict_logits(bundle))


def fused_forward(network: FusedNetwork, bundle: SubsetTensorBundle, train: bool = False, rng=None):
    """Failure probability per patient for a whole bundle."""
    if train:
        logit, _ = network.forward(split_inputs(bundle), bundle.static if network.spec.static_dim else None,
                                   train=True, rng=rng)
        return sigmoid(logit)
    return network.predict_proba(bundle)
