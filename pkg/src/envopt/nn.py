"""Minimal numpy layers with explicit backward passes (float64 throughout).

Every layer exposes ``forward(params, x) -> (y, cache)`` and
``backward(params, cache, dy) -> (dx, grads)``; parameters live in flat
dicts keyed ``"<prefix>.<name>"`` so whole policies serialise as one mapping.
"""
from __future__ import annotations

import numpy as np


def uniform_init(rng, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Dense:
    def __init__(self, prefix: str, n_in: int, n_out: int, act: str | None = "tanh"):
        self.prefix, self.n_in, self.n_out, self.act = prefix, n_in, n_out, act

    def init(self, rng) -> dict:
        return {
            f"{self.prefix}.W": uniform_init(rng, self.n_in, (self.n_in, self.n_out)),
            f"{self.prefix}.b": uniform_init(rng, self.n_in, (self.n_out,)),
        }

    def forward(self, params, x):
        z = x @ params[f"{self.prefix}.W"] + params[f"{self.prefix}.b"]
        y = np.tanh(z) if self.act == "tanh" else z
        return y, (x, y)

    def backward(self, params, cache, dy):
        x, y = cache
        dz = dy * (1.0 - y * y) if self.act == "tanh" else dy
        grads = {
            f"{self.prefix}.W": x.reshape(-1, self.n_in).T @ dz.reshape(-1, self.n_out),
            f"{self.prefix}.b": dz.reshape(-1, self.n_out).sum(0),
        }
        return dz @ params[f"{self.prefix}.W"].T, grads


class MLP:
    def __init__(self, prefix: str, sizes, out_act: str | None = "tanh"):
        self.layers = [
            Dense(f"{prefix}.{k}", a, b, "tanh" if k < len(sizes) - 2 else out_act)
            for k, (a, b) in enumerate(zip(sizes[:-1], sizes[1:]))
        ]

    def init(self, rng) -> dict:
        out = {}
        for layer in self.layers:
            out.update(layer.init(rng))
        return out

    def forward(self, params, x):
        caches = []
        for layer in self.layers:
            x, c = layer.forward(params, x)
            caches.append(c)
        return x, caches

    def backward(self, params, caches, dy):
        grads = {}
        for layer, c in zip(reversed(self.layers), reversed(caches)):
            dy, g = layer.backward(params, c, dy)
            grads.update(g)
        return dy, grads


class Conv2x2:
    """Valid 2x2 convolution, stride 1, tanh: (B, C, H, W) -> (B, O, H-1, W-1)."""

    def __init__(self, prefix: str, c_in: int, c_out: int):
        self.prefix, self.c_in, self.c_out = prefix, c_in, c_out

    def init(self, rng) -> dict:
        fan_in = 4 * self.c_in
        return {
            f"{self.prefix}.W": uniform_init(rng, fan_in, (self.c_out, self.c_in, 2, 2)),
            f"{self.prefix}.b": uniform_init(rng, fan_in, (self.c_out,)),
        }

    def forward(self, params, x):
        W = params[f"{self.prefix}.W"]
        H, Wd = x.shape[2] - 1, x.shape[3] - 1
        z = params[f"{self.prefix}.b"][None, :, None, None] + sum(
            np.einsum("bchw,oc->bohw", x[:, :, di:di + H, dj:dj + Wd], W[:, :, di, dj], optimize=True)
            for di in range(2)
            for dj in range(2)
        )
        y = np.tanh(z)
        return y, (x, y)

    def backward(self, params, cache, dy):
        x, y = cache
        W = params[f"{self.prefix}.W"]
        dz = dy * (1.0 - y * y)
        H, Wd = dz.shape[2], dz.shape[3]
        dW = np.empty_like(W)
        dx = np.zeros_like(x)
        for di in range(2):
            for dj in range(2):
                xs = x[:, :, di:di + H, dj:dj + Wd]
                dW[:, :, di, dj] = np.einsum("bohw,bchw->oc", dz, xs, optimize=True)
                dx[:, :, di:di + H, dj:dj + Wd] += np.einsum("bohw,oc->bchw", dz, W[:, :, di, dj], optimize=True)
        return dx, {f"{self.prefix}.W": dW, f"{self.prefix}.b": dz.sum((0, 2, 3))}


class Adam:
    def __init__(self, params: dict, lr: float = 3e-4, betas=(0.9, 0.999), eps: float = 1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, betas[0], betas[1], eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        """In-place gradient *descent* step."""
        self.t += 1
        c1 = 1 - self.b1**self.t
        c2 = 1 - self.b2**self.t
        for k, g in grads.items():
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def clip_grad_norm(grads: dict, max_norm: float) -> float:
    total = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
    if max_norm and total > max_norm:
        s = max_norm / (total + 1e-12)
        for k in grads:
            grads[k] = grads[k] * s
    return total
