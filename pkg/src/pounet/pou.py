"""Learned partition-of-unity architectures.

Two parametrizations of a vector of nonnegative functions summing to one:

* ``RbfNet`` — normalized Gaussians with trainable centers and shape
  parameters (the shape parameters are optimized in log space so they
  stay positive).
* ``ResNetPou`` — a ReLU residual network composed with a softmax output
  layer. Residual blocks update the hidden state as h <- h + relu(W h + b)
  at constant width.

Every architecture exposes ``partitions`` (forward evaluation over a
batch), ``partitions_grad`` (analytic gradient of sum_{i,a} U[i,a] *
phi_a(x_i) with respect to the flat parameter vector), and a deterministic
flat parameter layout via ``get_params`` / ``set_params``.
"""

from __future__ import annotations

import numpy as np

from .domain import Box


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    # max subtraction keeps exp() in range; result is unchanged mathematically
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def _softmax_backward(phi: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """d/dz of sum(U * softmax(z)) given phi = softmax(z)."""
    inner = (upstream * phi).sum(axis=1, keepdims=True)
    return phi * (upstream - inner)


def _check_batch(xs: np.ndarray, d: int) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[1] != d:
        raise ValueError(f"expected points of shape (n, {d}), got {xs.shape}")
    return xs


class RbfNet:
    """Normalized-Gaussian partition: phi_a ~ exp(-|x - c_a|^2 / s_a^2)."""

    architecture = "rbf"

    def __init__(self, centers: np.ndarray, log_shapes: np.ndarray):
        centers = np.asarray(centers, dtype=np.float64)
        log_shapes = np.asarray(log_shapes, dtype=np.float64).reshape(-1)
        if centers.ndim != 2:
            raise ValueError("centers must have shape (n_part, d)")
        if log_shapes.shape[0] != centers.shape[0]:
            raise ValueError("need one shape parameter per partition")
        self.centers = centers
        self.log_shapes = log_shapes

    @property
    def n_part(self) -> int:
        return self.centers.shape[0]

    @property
    def dim_input(self) -> int:
        return self.centers.shape[1]

    @property
    def shapes(self) -> np.ndarray:
        return np.exp(self.log_shapes)

    @property
    def n_params(self) -> int:
        return self.centers.size + self.log_shapes.size

    def get_params(self) -> np.ndarray:
        """Flat layout: [centers row-major, log_shapes]."""
        return np.concatenate([self.centers.ravel(), self.log_shapes])

    def set_params(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64).reshape(-1)
        if flat.shape[0] != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {flat.shape[0]}")
        nc = self.centers.size
        self.centers = flat[:nc].reshape(self.centers.shape).copy()
        self.log_shapes = flat[nc:].copy()

    def _logits(self, xs: np.ndarray):
        diff = xs[:, None, :] - self.centers[None, :, :]
        sq = np.einsum("npd,npd->np", diff, diff)
        inv_s2 = np.exp(-2.0 * self.log_shapes)
        z = -sq * inv_s2[None, :]
        return z, diff, inv_s2

    def partitions(self, xs: np.ndarray) -> np.ndarray:
        xs = _check_batch(xs, self.dim_input)
        z, _, _ = self._logits(xs)
        return _softmax_rows(z)

    def partitions_grad(self, xs: np.ndarray, upstream: np.ndarray) -> np.ndarray:
        xs = _check_batch(xs, self.dim_input)
        z, diff, inv_s2 = self._logits(xs)
        phi = _softmax_rows(z)
        g = _softmax_backward(phi, upstream)  # dL/dz, (n, n_part)
        # z = -|x - c|^2 * exp(-2 t): dz/dc = 2 (x - c) exp(-2 t), dz/dt = -2 z
        dcenters = 2.0 * inv_s2[:, None] * np.einsum("np,npd->pd", g, diff)
        dlog = -2.0 * (g * z).sum(axis=0)
        return np.concatenate([dcenters.ravel(), dlog])

    def manifest(self) -> dict:
        return {"architecture": self.architecture, "n_part": self.n_part, "dim_input": self.dim_input}


def _trunk_forward(w_in, b_in, blocks, xs):
    """ReLU residual trunk; returns features plus caches for backprop."""
    h = xs @ w_in.T + b_in
    inputs = []
    masks = []
    for w, b in blocks:
        a = h @ w.T + b
        mask = a > 0.0
        inputs.append(h)
        masks.append(mask)
        h = h + np.where(mask, a, 0.0)
    return h, inputs, masks


def _trunk_backward(w_in, blocks, xs, inputs, masks, dh):
    """Backprop dh through the trunk; returns per-tensor gradients."""
    dblocks = []
    for k in range(len(blocks) - 1, -1, -1):
        w, _ = blocks[k]
        da = np.where(masks[k], dh, 0.0)
        dw = da.T @ inputs[k]
        db = da.sum(axis=0)
        dh = dh + da @ w
        dblocks.append((dw, db))
    dblocks.reverse()
    dw_in = dh.T @ xs
    db_in = dh.sum(axis=0)
    return dw_in, db_in, dblocks


class ResNetPou:
    """Residual ReLU network with a softmax head over n_part outputs."""

    architecture = "resnet"

    def __init__(self, w_in, b_in, blocks, w_out, b_out):
        self.w_in = np.asarray(w_in, dtype=np.float64)
        self.b_in = np.asarray(b_in, dtype=np.float64).reshape(-1)
        self.blocks = [
            (np.asarray(w, dtype=np.float64), np.asarray(b, dtype=np.float64).reshape(-1))
            for w, b in blocks
        ]
        self.w_out = np.asarray(w_out, dtype=np.float64)
        self.b_out = np.asarray(b_out, dtype=np.float64).reshape(-1)
        w = self.w_in.shape[0]
        if self.b_in.shape[0] != w:
            raise ValueError("input bias width mismatch")
        for wk, bk in self.blocks:
            if wk.shape != (w, w) or bk.shape[0] != w:
                raise ValueError("residual blocks must be square with matching bias")
        if self.w_out.shape[1] != w or self.b_out.shape[0] != self.w_out.shape[0]:
            raise ValueError("output head shape mismatch")

    @property
    def width(self) -> int:
        return self.w_in.shape[0]

    @property
    def depth(self) -> int:
        return len(self.blocks)

    @property
    def n_part(self) -> int:
        return self.w_out.shape[0]

    @property
    def dim_input(self) -> int:
        return self.w_in.shape[1]

    @property
    def n_params(self) -> int:
        n = self.w_in.size + self.b_in.size + self.w_out.size + self.b_out.size
        return n + sum(w.size + b.size for w, b in self.blocks)

    def get_params(self) -> np.ndarray:
        """Flat layout: [w_in, b_in, (w_k, b_k) per block, w_out, b_out]."""
        parts = [self.w_in.ravel(), self.b_in]
        for w, b in self.blocks:
            parts.extend([w.ravel(), b])
        parts.extend([self.w_out.ravel(), self.b_out])
        return np.concatenate(parts)

    def set_params(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64).reshape(-1)
        if flat.shape[0] != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {flat.shape[0]}")
        pos = 0

        def take(shape):
            nonlocal pos
            size = int(np.prod(shape))
            out = flat[pos:pos + size].reshape(shape).copy()
            pos += size
            return out

        self.w_in = take(self.w_in.shape)
        self.b_in = take(self.b_in.shape)
        self.blocks = [(take(w.shape), take(b.shape)) for w, b in self.blocks]
        self.w_out = take(self.w_out.shape)
        self.b_out = take(self.b_out.shape)

    def partitions(self, xs: np.ndarray) -> np.ndarray:
        xs = _check_batch(xs, self.dim_input)
        h, _, _ = _trunk_forward(self.w_in, self.b_in, self.blocks, xs)
        return _softmax_rows(h @ self.w_out.T + self.b_out)

    def partitions_grad(self, xs: np.ndarray, upstream: np.ndarray) -> np.ndarray:
        xs = _check_batch(xs, self.dim_input)
        h, inputs, masks = _trunk_forward(self.w_in, self.b_in, self.blocks, xs)
        phi = _softmax_rows(h @ self.w_out.T + self.b_out)
        dlogits = _softmax_backward(phi, upstream)
        dw_out = dlogits.T @ h
        db_out = dlogits.sum(axis=0)
        dh = dlogits @ self.w_out
        dw_in, db_in, dblocks = _trunk_backward(self.w_in, self.blocks, xs, inputs, masks, dh)
        parts = [dw_in.ravel(), db_in]
        for dw, db in dblocks:
            parts.extend([dw.ravel(), db])
        parts.extend([dw_out.ravel(), db_out])
        return np.concatenate(parts)

    def manifest(self) -> dict:
        return {
            "architecture": self.architecture,
            "n_part": self.n_part,
            "dim_input": self.dim_input,
            "width": self.width,
            "depth": self.depth,
        }


def eval_partitions(net, xs: np.ndarray) -> np.ndarray:
    """Partition values for a batch; rows sum to 1, entries are >= 0."""
    if hasattr(net, "get_params") and not np.isfinite(net.get_params()).all():
        raise ValueError("partition network has non-finite parameters")
    return net.partitions(xs)


def grad_partitions(net, xs: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Gradient of sum_{i,a} upstream[i,a] * phi_a(x_i) over the flat parameters."""
    xs = np.asarray(xs, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (xs.shape[0], net.n_part):
        raise ValueError(
            f"upstream shape {upstream.shape} does not match ({xs.shape[0]}, {net.n_part})"
        )
    return net.partitions_grad(xs, upstream)


def init_rbf(n_part: int, d: int, domain: Box, rng: np.random.Generator) -> RbfNet:
    """Centers drawn uniformly from the domain, unit shape parameters."""
    if domain.dim != d:
        raise ValueError(f"domain dimension {domain.dim} != {d}")
    centers = domain.sample(rng, n_part)
    return RbfNet(centers, np.zeros(n_part))


def init_resnet_box(
    width: int, depth: int, n_part: int, d: int, domain: Box, rng: np.random.Generator
) -> ResNetPou:
    """Box-style initialization of the residual partition network.

    First-layer rows are unit-norm directions with biases chosen so each
    hyperplane w.x + b = 0 passes through a uniform point of the domain
    interior. Residual blocks get variance-preserving weights (std
    1/sqrt(width)) and zero biases. The output head starts at zero, so the
    initial partition is uniform and every partition has global support.
    """
    if width < 1 or depth < 1:
        raise ValueError("width and depth must be >= 1")
    if domain.dim != d:
        raise ValueError(f"domain dimension {domain.dim} != {d}")
    dirs = rng.normal(size=(width, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    anchors = domain.sample(rng, width)
    b_in = -np.einsum("wd,wd->w", dirs, anchors)
    blocks = [
        (rng.normal(scale=1.0 / np.sqrt(width), size=(width, width)), np.zeros(width))
        for _ in range(depth)
    ]
    return ResNetPou(dirs, b_in, blocks, np.zeros((n_part, width)), np.zeros(n_part))


def net_from_manifest(man: dict) -> RbfNet | ResNetPou:
    """Rebuild an architecture skeleton (zero parameters) from its manifest."""
    arch = man.get("architecture")
    if arch == "rbf":
        return RbfNet(np.zeros((man["n_part"], man["dim_input"])), np.zeros(man["n_part"]))
    if arch == "resnet":
        w, d = man["width"], man["dim_input"]
        blocks = [(np.zeros((w, w)), np.zeros(w)) for _ in range(man["depth"])]
        return ResNetPou(np.zeros((w, d)), np.zeros(w), blocks, np.zeros((man["n_part"], w)), np.zeros(man["n_part"]))
    raise ValueError(f"unknown architecture tag {arch!r}")
