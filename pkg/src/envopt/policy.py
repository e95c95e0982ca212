"""CNN (offline, 5-way categorical) and single-layer GNN (online, 2-D Gaussian) policies."""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np

from .nn import MLP, Conv2x2, Dense

LOG_2PI = float(np.log(2 * np.pi))
CATEGORICAL = "categorical"
GAUSSIAN = "gaussian"


# ---------------------------------------------------------------------------
# distributions


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def categorical_logp(logits, actions):
    lsm = log_softmax(logits)
    return np.take_along_axis(lsm, np.asarray(actions)[..., None], -1)[..., 0]


def categorical_entropy(logits):
    lsm = log_softmax(logits)
    return -(np.exp(lsm) * lsm).sum(-1)


def _categorical_eval(logits, actions):
    lsm = log_softmax(logits)
    p = np.exp(lsm)
    a = np.asarray(actions, int)
    logp = lsm[np.arange(len(a)), a]
    ent = -(p * lsm).sum(-1)
    return logp, ent, (p, lsm, a, ent)


def _categorical_grad(cache, dlogp, dent):
    p, lsm, a, ent = cache
    d = -p * dlogp[:, None]
    d[np.arange(len(a)), a] += dlogp
    # dH/dz_k = -p_k (log p_k + H)
    d += dent[:, None] * (-p * (lsm + ent[:, None]))
    return d


def gaussian_logp(mean, log_std, actions):
    z = (actions - mean) / np.exp(log_std)
    return (-0.5 * z * z - log_std - 0.5 * LOG_2PI).sum(-1)


def gaussian_entropy(log_std, batch: int):
    return np.full(batch, float((log_std + 0.5 * (LOG_2PI + 1)).sum()))


def sample_action(head_output, kind: str, rng):
    """Draw an action and its exact log-probability.

    ``head_output`` is the logit vector for ``categorical``; for ``gaussian``
    it is ``concat(mean, log_std)``.
    """
    head = np.asarray(head_output, float)
    if not np.all(np.isfinite(head)):
        raise ValueError("policy head produced non-finite values")
    if kind == CATEGORICAL:
        lsm = log_softmax(head)
        p = np.exp(lsm)
        a = int(np.searchsorted(np.cumsum(p), rng.random() * p.sum(), side="right"))
        a = min(a, len(p) - 1)
        return a, float(lsm[a])
    if kind == GAUSSIAN:
        k = len(head) // 2
        mean, log_std = head[:k], head[k:]
        a = mean + np.exp(log_std) * rng.standard_normal(k)
        return a, float(gaussian_logp(mean, log_std, a))
    raise ValueError(f"unknown action kind {kind!r}")


# ---------------------------------------------------------------------------
# CNN


class CnnPolicy:
    kind = CATEGORICAL

    def __init__(self, height=8, width=8, channels=4, features=25, n_layers=4, n_actions=5, value_hidden=64,
                 seed=0, stay_bias=0.0):
        self.config = dict(height=height, width=width, channels=channels, features=features, n_layers=n_layers,
                           n_actions=n_actions, value_hidden=value_hidden, seed=seed, stay_bias=stay_bias)
        if height <= n_layers or width <= n_layers:
            raise ValueError("grid too small for the convolution stack")
        self.convs = [Conv2x2(f"conv{k}", channels if k == 0 else features, features) for k in range(n_layers)]
        self.flat = features * (height - n_layers) * (width - n_layers)
        self.head = Dense("pi", self.flat, n_actions, act=None)
        self.value = MLP("v", [self.flat, value_hidden, 1], out_act=None)
        rng = np.random.default_rng(seed)
        self.params = {}
        for layer in (*self.convs, self.head, self.value):
            self.params.update(layer.init(rng))
        self.params["pi.b"][-1] += stay_bias

    def forward(self, obs):
        x = np.asarray(obs, float)
        if x.ndim == 3:
            x = x[None]
        c = self.config
        if x.shape[1:] != (c["channels"], c["height"], c["width"]):
            raise ValueError(f"observation shape {x.shape[1:]} does not match the configured grid")
        caches = []
        for conv in self.convs:
            x, cc = conv.forward(self.params, x)
            caches.append(cc)
        f = x.reshape(len(x), -1)
        logits, hc = self.head.forward(self.params, f)
        v, vc = self.value.forward(self.params, f)
        return logits, v[:, 0], (caches, x.shape, hc, vc)

    def backward(self, cache, dlogits, dvalues) -> dict:
        caches, shape, hc, vc = cache
        df, grads = self.head.backward(self.params, hc, dlogits)
        dfv, gv = self.value.backward(self.params, vc, np.asarray(dvalues)[:, None])
        grads.update(gv)
        dx = (df + dfv).reshape(shape)
        for conv, cc in zip(reversed(self.convs), reversed(caches)):
            dx, g = conv.backward(self.params, cc, dx)
            grads.update(g)
        return grads

    def act(self, obs, rng, greedy: bool = False):
        logits, v, _ = self.forward(obs)
        if greedy:
            a = int(np.argmax(logits[0]))
            return a, float(log_softmax(logits[0])[a]), float(v[0])
        a, lp = sample_action(logits[0], CATEGORICAL, rng)
        return a, lp, float(v[0])


    @staticmethod
    def collate(observations):
        return np.stack([np.asarray(o, float) for o in observations])

    def evaluate(self, obs_batch, actions):
        """Log-probs, entropies and values for stored samples (differentiable)."""
        logits, v, cache = self.forward(obs_batch)
        logp, ent, ccache = _categorical_eval(logits, actions)
        return logp, ent, v, (cache, ccache)

    def backward_eval(self, cache, dlogp, dent, dvalues) -> dict:
        fcache, ccache = cache
        return self.backward(fcache, _categorical_grad(ccache, dlogp, dent), dvalues)


def cnn_forward(obs, policy: CnnPolicy) -> np.ndarray:
    logits, _, _ = policy.forward(obs)
    return logits[0] if np.asarray(obs).ndim == 3 else logits


class GreedyPolicy:
    """Wraps a policy so that ``act`` returns the mode of its distribution."""

    def __init__(self, policy):
        self.policy = policy

    def act(self, obs, rng):
        return self.policy.act(obs, rng, greedy=True)


class ConstantPolicy:
    def __init__(self, action: int):
        self.action = int(action)

    def act(self, obs, rng):
        return self.action, 0.0, 0.0


class TabularPolicy:
    """Observation-independent categorical policy (bandits and trainer tests)."""

    kind = CATEGORICAL

    def __init__(self, n_actions=2, seed=0):
        self.config = dict(n_actions=n_actions, seed=seed)
        self.params = {"logits": np.zeros(n_actions), "value": np.zeros(1)}

    def probs(self) -> np.ndarray:
        return np.exp(log_softmax(self.params["logits"]))

    def act(self, obs, rng, greedy=False):
        z = self.params["logits"]
        if greedy:
            a = int(np.argmax(z))
            return a, float(log_softmax(z)[a]), float(self.params["value"][0])
        a, lp = sample_action(z, CATEGORICAL, rng)
        return a, lp, float(self.params["value"][0])

    @staticmethod
    def collate(observations):
        return len(observations)

    def evaluate(self, count, actions):
        logits = np.broadcast_to(self.params["logits"], (count, len(self.params["logits"])))
        logp, ent, cc = _categorical_eval(logits, actions)
        return logp, ent, np.full(count, self.params["value"][0]), cc

    def backward_eval(self, cache, dlogp, dent, dvalues) -> dict:
        d = _categorical_grad(cache, dlogp, dent)
        return {"logits": d.sum(0), "value": np.array([np.sum(dvalues)])}


# ---------------------------------------------------------------------------
# GNN


@dataclass
class Graph:
    """Directed message graph. Edge k carries x[senders[k]] to targets[edge_target[k]].

    Outputs are produced only for the ``targets`` nodes.
    """

    x: np.ndarray
    senders: np.ndarray
    edge_target: np.ndarray
    edge_attr: np.ndarray
    targets: np.ndarray

    @staticmethod
    def batch(graphs) -> "Graph":
        xs, snd, et, ea, tg = [], [], [], [], []
        n_off = t_off = 0
        for g in graphs:
            xs.append(g.x)
            snd.append(g.senders + n_off)
            et.append(g.edge_target + t_off)
            ea.append(g.edge_attr)
            tg.append(g.targets + n_off)
            n_off += len(g.x)
            t_off += len(g.targets)
        return Graph(np.concatenate(xs), np.concatenate(snd).astype(int), np.concatenate(et).astype(int),
                     np.concatenate(ea), np.concatenate(tg).astype(int))


class GnnPolicy:
    kind = GAUSSIAN

    def __init__(self, node_dim, edge_dim, hidden=64, msg_dim=64, out_dim=64, action_dim=2, value_hidden=64,
                 log_std_init=-0.5, seed=0):
        self.config = dict(node_dim=node_dim, edge_dim=edge_dim, hidden=hidden, msg_dim=msg_dim, out_dim=out_dim,
                           action_dim=action_dim, value_hidden=value_hidden, log_std_init=log_std_init, seed=seed)
        self.node_dim, self.edge_dim, self.msg_dim = node_dim, edge_dim, msg_dim
        self.message = MLP("msg", [2 * node_dim + edge_dim, hidden, msg_dim])
        self.update = MLP("upd", [node_dim + msg_dim, hidden, out_dim])
        self.head = Dense("mu", out_dim, action_dim, act="tanh")
        self.value = MLP("v", [out_dim, value_hidden, 1], out_act=None)
        rng = np.random.default_rng(seed)
        self.params = {}
        for layer in (self.message, self.update, self.head, self.value):
            self.params.update(layer.init(rng))
        self.params["log_std"] = np.full(action_dim, float(log_std_init))

    def embed(self, g: Graph):
        """Per-target output F_u(x_i, sum_j F_m(x_i, x_j, e_ij))."""
        if g.x.shape[1] != self.node_dim or (len(g.edge_attr) and g.edge_attr.shape[1] != self.edge_dim):
            raise ValueError("feature dimensions do not match the policy")
        xt = g.x[g.targets]
        inp = np.concatenate([xt[g.edge_target], g.x[g.senders], g.edge_attr.reshape(-1, self.edge_dim)], 1)
        msgs, mc = self.message.forward(self.params, inp)
        agg = np.zeros((len(g.targets), self.msg_dim))
        np.add.at(agg, g.edge_target, msgs)
        h, uc = self.update.forward(self.params, np.concatenate([xt, agg], 1))
        return h, (g, mc, uc)

    def embed_backward(self, cache, dh) -> dict:
        g, mc, uc = cache
        du, grads = self.update.backward(self.params, uc, dh)
        dagg = du[:, self.node_dim:]
        _, gm = self.message.backward(self.params, mc, dagg[g.edge_target])
        grads.update(gm)
        return grads

    def forward(self, g: Graph):
        h, ec = self.embed(g)
        mean, hc = self.head.forward(self.params, h)
        v, vc = self.value.forward(self.params, h)
        return mean, self.params["log_std"], v[:, 0], (ec, hc, vc)

    def backward(self, cache, dmean, dlog_std, dvalues) -> dict:
        ec, hc, vc = cache
        dh, grads = self.head.backward(self.params, hc, dmean)
        dhv, gv = self.value.backward(self.params, vc, np.asarray(dvalues)[:, None])
        grads.update(gv)
        grads.update(self.embed_backward(ec, dh + dhv))
        grads["log_std"] = np.asarray(dlog_std, float)
        return grads

    def act(self, g: Graph, rng, greedy: bool = False):
        mean, log_std, v, _ = self.forward(g)
        if greedy:
            return mean.copy(), gaussian_logp(mean, log_std, mean), v
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(log_std))):
            raise ValueError("policy head produced non-finite values")
        acts = mean + np.exp(log_std) * rng.standard_normal(mean.shape)
        return acts, gaussian_logp(mean, log_std, acts), v


    @staticmethod
    def collate(observations):
        return Graph.batch(observations)

    def evaluate(self, graph: Graph, actions):
        mean, log_std, v, cache = self.forward(graph)
        a = np.asarray(actions, float)
        logp = gaussian_logp(mean, log_std, a)
        ent = gaussian_entropy(log_std, len(mean))
        return logp, ent, v, (cache, mean, log_std, a)

    def backward_eval(self, cache, dlogp, dent, dvalues) -> dict:
        fcache, mean, log_std, a = cache
        sig = np.exp(log_std)
        z = (a - mean) / sig
        dmean = dlogp[:, None] * z / sig
        dls = (dlogp[:, None] * (z * z - 1)).sum(0) + dent.sum()
        return self.backward(fcache, dmean, dls, dvalues)


def gnn_forward(node_features, edges, params_or_policy: GnnPolicy, edge_features=None):
    """Plain-array wrapper: every node is a target; ``edges`` are (receiver, sender) pairs."""
    x = np.asarray(node_features, float)
    e = np.asarray(edges, int).reshape(-1, 2)
    ea = np.zeros((len(e), params_or_policy.edge_dim)) if edge_features is None else np.asarray(edge_features, float)
    g = Graph(x, e[:, 1], e[:, 0], ea, np.arange(len(x)))
    return params_or_policy.embed(g)[0]


# ---------------------------------------------------------------------------
# serialisation

_MAGIC = b"ENVOPT\x01\n"
FORMAT_VERSION = 1


def _config_hash(cls_name, config) -> str:
    return hashlib.sha256(json.dumps([cls_name, config], sort_keys=True).encode()).hexdigest()[:16]


def save_policy(policy, path) -> None:
    keys = sorted(policy.params)
    header = {
        "version": FORMAT_VERSION,
        "class": type(policy).__name__,
        "config": policy.config,
        "config_hash": _config_hash(type(policy).__name__, policy.config),
        "params": [[k, list(policy.params[k].shape)] for k in keys],
    }
    hb = json.dumps(header).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(hb)))
        fh.write(hb)
        for k in keys:
            fh.write(np.ascontiguousarray(policy.params[k], "<f8").tobytes())


def load_policy(path):
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError(f"{path} is not a policy checkpoint")
        (n,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(n))
        if header["version"] != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {header['version']}")
        cls = {"CnnPolicy": CnnPolicy, "GnnPolicy": GnnPolicy, "TabularPolicy": TabularPolicy}[header["class"]]
        policy = cls(**header["config"])
        for k, shape in header["params"]:
            count = int(np.prod(shape)) if shape else 1
            policy.params[k] = np.frombuffer(fh.read(8 * count), "<f8").reshape(shape).copy()
    return policy
