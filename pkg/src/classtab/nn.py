"""Small multilayer perceptrons fitted to the H field, with certified sup-norm checks.

Networks are plain numpy: ``weights[k]`` has shape (out, in) and the forward
pass is ``W_L rho(... rho(W_1 x + b_1) ...) + b_L``.

Training is two-phase. Phase 1 draws a random hidden layer whose kinks are
spread over K (jittered grid of anchor points) and solves the readout by
least squares. Phase 2 refines every parameter with Adam on a log-mean-exp
surrogate of the maximum absolute residual. The reported sup error is a
bound over all of K: the network's range on every cell of a grid four times
finer than the training grid is enclosed (exactly where the ReLU pattern is
fixed, by interval arithmetic otherwise), and the target's own variation over
the cell is bounded by its Lipschitz constant times the cell's half-diagonal.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field as dc_field

import numpy as np

from ._parallel import child_rng
from .construct import HField, class_prediction, compose_G, grid_points, stable_set
from .domains import Box, check_p, lp_norm
from .fields import OracleField, extend

__all__ = [
    "MLP",
    "ShallowNet",
    "TrainReport",
    "eval_net",
    "train_shallow",
    "train_narrow_deep",
    "verify_net",
    "fit_network",
    "certified_sup_error",
    "interpolation_fraction",
    "NetLabels",
    "net_as_field",
    "stability_of_net",
    "load_net",
    "save_net",
    "LabelBlend",
    "ChainReport",
    "rounding_chain",
]

_STREAM_TRAIN = 11


def _relu(z):
    return np.maximum(z, 0.0)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


ACTIVATIONS = {
    "relu": (_relu, lambda z, a: (z > 0).astype(z.dtype)),
    "tanh": (np.tanh, lambda z, a: 1.0 - a * a),
    "sigmoid": (_sigmoid, lambda z, a: a * (1.0 - a)),
}

# sup |rho''|, for the Taylor enclosure of smooth activations
_CURVATURE = {"tanh": 4.0 / (3.0 * math.sqrt(3.0)), "sigmoid": math.sqrt(3.0) / 18.0}


class MLP:
    """Fully connected network with one activation on every hidden layer."""

    def __init__(self, weights, biases, activation="relu"):
        if activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {sorted(ACTIVATIONS)}")
        W = [np.array(w, dtype=float, ndmin=2) for w in weights]
        b = [np.array(v, dtype=float).reshape(-1) for v in biases]
        if not W or len(W) != len(b):
            raise ValueError("need one bias vector per weight matrix")
        for k, (w, v) in enumerate(zip(W, b)):
            if w.shape[0] != v.shape[0]:
                raise ValueError(f"layer {k}: bias length {v.shape[0]} != rows {w.shape[0]}")
            if k and w.shape[1] != W[k - 1].shape[0]:
                raise ValueError(f"layer {k}: input size does not match previous layer")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(v))):
                raise ValueError("weights must be finite")
        self.weights = W
        self.biases = b
        self.activation = activation

    @property
    def dims(self):
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def input_dim(self):
        return self.dims[0]

    @property
    def output_dim(self):
        return self.dims[-1]

    @property
    def depth(self):
        """Number of hidden layers."""
        return len(self.weights) - 1

    @property
    def width(self):
        return max(self.dims[1:-1], default=0)

    def __repr__(self):
        return f"{type(self).__name__}(dims={self.dims}, activation={self.activation!r})"

    def forward(self, X, cache=False):
        act = ACTIVATIONS[self.activation][0]
        A = X
        zs, acts = [], [X]
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            Z = A @ w.T + b
            A = act(Z)
            if cache:
                zs.append(Z)
                acts.append(A)
        out = A @ self.weights[-1].T + self.biases[-1]
        return (out, zs, acts) if cache else out

    __call__ = forward

    def gradients(self, X, dout):
        """Parameter gradients of sum(dout * forward(X))."""
        dact = ACTIVATIONS[self.activation][1]
        _, zs, acts = self.forward(X, cache=True)
        gW = [None] * len(self.weights)
        gb = [None] * len(self.weights)
        G = dout
        for k in range(len(self.weights) - 1, -1, -1):
            gW[k] = G.T @ acts[k]
            gb[k] = G.sum(axis=0)
            if k:
                G = (G @ self.weights[k]) * dact(zs[k - 1], acts[k])
        return gW, gb

    def params(self):
        return self.weights + self.biases

    def copy(self):
        return type(self)([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                          self.activation)

    def to_dict(self):
        return {
            "dims": self.dims,
            "activation": self.activation,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d):
        W = [np.asarray(w, dtype=float).reshape(o, i)
             for w, i, o in zip(d["weights"], d["dims"][:-1], d["dims"][1:])]
        net = MLP(W, d["biases"], d.get("activation", "relu"))
        if net.depth == 1:
            return ShallowNet(net.weights, net.biases, net.activation)
        return net

    def identical(self, other):
        """Bitwise equality of architecture and parameters."""
        return (self.activation == other.activation and self.dims == other.dims
                and all(np.array_equal(a, b) for a, b in zip(self.params(), other.params())))


class ShallowNet(MLP):
    """One hidden layer: W_2 rho(W_1 x + b_1) + b_2."""

    def __init__(self, weights, biases, activation="relu"):
        super().__init__(weights, biases, activation)
        if len(self.weights) != 2:
            raise ValueError("a shallow net has exactly two affine maps")

    @property
    def hidden_weights(self):
        return self.weights[0]

    @property
    def hidden_biases(self):
        return self.biases[0]

    @property
    def output_weights(self):
        return self.weights[1]

    @property
    def output_biases(self):
        return self.biases[1]


def save_net(net, path):
    with open(path, "w") as fh:
        json.dump(net.to_dict(), fh)


def load_net(path):
    with open(path) as fh:
        return MLP.from_dict(json.load(fh))


def eval_net(net, x):
    """Forward pass; a single point gives (q,), a batch (n, q)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1
    X = x.reshape(1, -1) if single else x
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise ValueError(f"net expects {net.input_dim}-dimensional inputs, got shape {x.shape}")
    out = net.forward(X)
    return out[0] if single else out


# ---------------------------------------------------------------- certification

def _interval_layer(w, lo, hi):
    c = 0.5 * (lo + hi)
    r = 0.5 * (hi - lo)
    mid = c @ w.T
    rad = r @ np.abs(w).T
    return mid - rad, mid + rad


def _output_bounds(net, lo, hi):
    """Enclosure of net over each box [lo_i, hi_i]."""
    act = ACTIVATIONS[net.activation][0]
    relu = net.activation == "relu"
    if net.depth == 1 and relu:
        # stable units enter exactly through their affine part, crossing units by interval
        W1, b1 = net.weights[0], net.biases[0]
        W2, b2 = net.weights[1], net.biases[1]
        c = 0.5 * (lo + hi)
        r = 0.5 * (hi - lo)
        zc = c @ W1.T + b1
        zr = r @ np.abs(W1).T
        zl, zu = zc - zr, zc + zr
        on = zl >= 0
        mid = np.where(on, zc, 0.0) @ W2.T + b2
        onf = on.astype(float)
        rad = np.empty_like(mid)
        for k in range(W2.shape[0]):
            rad[:, k] = np.sum(np.abs((onf * W2[k]) @ W1) * r, axis=1)
        # a crossing unit's output lies in [0, zu]
        uu = np.where(zu > 0, zu, 0.0) * ~on
        return mid - rad + uu @ np.minimum(W2, 0.0).T, mid + rad + uu @ np.maximum(W2, 0.0).T
    if net.depth == 1:
        # Taylor form: slope at the centre is exact, the slope change is bounded by sup|rho''|
        W1, b1 = net.weights[0], net.biases[0]
        W2, b2 = net.weights[1], net.biases[1]
        c = 0.5 * (lo + hi)
        r = 0.5 * (hi - lo)
        zc = c @ W1.T + b1
        ac = act(zc)
        slope = ACTIVATIONS[net.activation][1](zc, ac)
        zr = r @ np.abs(W1).T
        mid = ac @ W2.T + b2
        rem = (_CURVATURE[net.activation] * zr * zr) @ np.abs(W2).T
        rad = np.empty_like(mid)
        for k in range(W2.shape[0]):
            rad[:, k] = np.sum(np.abs((slope * W2[k]) @ W1) * r, axis=1)
        return mid - rad - rem, mid + rad + rem
    L, U = lo, hi
    stable = np.ones(lo.shape[0], dtype=bool)
    masks = []
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        zl, zu = _interval_layer(w, L, U)
        zl, zu = zl + b, zu + b
        if relu:
            stable &= np.all((zl >= 0) | (zu <= 0), axis=1)
            masks.append(zl >= 0)
        L, U = act(zl), act(zu)
    ol, ou = _interval_layer(net.weights[-1], L, U)
    ol, ou = ol + net.biases[-1], ou + net.biases[-1]
    if relu and stable.any():
        # fixed activation pattern: the net is affine on the box
        idx = np.flatnonzero(stable)
        c = 0.5 * (lo[idx] + hi[idx])
        r = 0.5 * (hi[idx] - lo[idx])
        J = np.broadcast_to(net.weights[0], (idx.size,) + net.weights[0].shape)
        for k, m in enumerate(masks):
            J = m[idx][:, :, None] * J
            J = np.einsum("oh,nhd->nod", net.weights[k + 1], J)
        mid = net.forward(c)
        rad = np.einsum("nqd,nd->nq", np.abs(J), r)
        ol[idx] = mid - rad
        ou[idx] = mid + rad
    return ol, ou


def _cell_errors(net, target, lip, lo, hi, p, offset=0.0, with_centre=False):
    centre = 0.5 * (lo + hi)
    T = target(centre)
    slack = lip * lp_norm(0.5 * (hi - lo), p) + offset
    ol, ou = _output_bounds(net, lo, hi)
    err = np.maximum(ou - (T - slack[:, None]), (T + slack[:, None]) - ol).max(axis=1)
    if with_centre:
        return err, np.abs(net.forward(centre) - T).max(axis=1)
    return err


def certified_sup_error(net, target, K: Box, cell, p=2.0, lipschitz=1.0, goal=None,
                        refine=3, chunk=8192, offset=0.0):
    """Upper bound on sup_{x in K} max_i |net_i(x) - target_i(x)|.

    Every coordinate of ``target`` must satisfy
    |t_i(x) - t_i(y)| <= lipschitz * ||x - y||_p + offset. Cells whose bound exceeds ``goal`` are split in half along
    every axis, up to ``refine`` times. Refinement stops for good once a cell
    centre already misses ``goal``, since no split can then certify it.
    """
    p = check_p(p)
    counts = np.maximum(1, np.round((K.hi - K.lo) / float(cell)).astype(int))
    w = (K.hi - K.lo) / counts
    axes = [K.lo[a] + np.arange(counts[a]) * w[a] for a in range(K.dim)]
    lo = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, K.dim)
    hi = np.minimum(lo + w, K.hi)
    worst = 0.0
    offsets = np.stack(np.meshgrid(*[[0.0, 0.5]] * K.dim, indexing="ij"), axis=-1).reshape(-1, K.dim)
    for s in range(0, lo.shape[0], chunk):
        L, H = lo[s:s + chunk], hi[s:s + chunk]
        for level in range(refine + 1):
            if level == 0 and goal is not None:
                e, at_centre = _cell_errors(net, target, lipschitz, L, H, p, offset, with_centre=True)
                if at_centre.max() >= goal:
                    refine = 0
            else:
                e = _cell_errors(net, target, lipschitz, L, H, p, offset)
            bad = e > goal if goal is not None else np.zeros(e.shape, bool)
            if level == refine or not bad.any():
                worst = max(worst, float(e.max()))
                break
            worst = max(worst, float(e[~bad].max(initial=0.0)))
            width = H[bad] - L[bad]
            L = (L[bad][:, None, :] + offsets[None] * width[:, None, :]).reshape(-1, K.dim)
            H = L + np.repeat(0.5 * width, offsets.shape[0], axis=0)
    return worst


# ---------------------------------------------------------------- training

@dataclass
class TrainReport:
    sup_error: float
    target: float
    iterations: int
    interpolation_fraction: float
    success: bool
    vacuous: bool = False
    train_sup_error: float = math.nan
    width: int = 0
    depth: int = 1
    activation: str = "relu"
    stable_points: int = 0
    slots: list = dc_field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def _jittered_points(K: Box, n, rng):
    """n points spread over K: a jittered grid, randomly ordered and trimmed."""
    d = K.dim
    m = int(math.ceil(n ** (1.0 / d)))
    w = (K.hi - K.lo) / m
    idx = np.stack(np.meshgrid(*[np.arange(m)] * d, indexing="ij"), axis=-1).reshape(-1, d)
    pts = K.lo + (idx + rng.uniform(size=idx.shape)) * w
    return pts[rng.permutation(pts.shape[0])[:n]]


def _random_features(K: Box, width, activation, rng):
    d = K.dim
    dirs = rng.normal(size=(width, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    if activation != "relu":
        dirs *= 4.0 / float(np.max(K.hi - K.lo)) * rng.uniform(0.5, 2.0, size=(width, 1))
    anchors = _jittered_points(K, width, rng)
    return dirs, -np.sum(dirs * anchors, axis=1)


def _readout(F, T, lawson=0, ridge=1e-10):
    """Least-squares readout; ``lawson`` > 0 reweights toward the largest residuals.

    Lawson's iteration multiplies each point's weight by its residual, which
    drives the weighted least-squares fit toward the minimax fit. The best
    iterate by maximum residual is kept.
    """
    A = np.hstack([F, np.ones((F.shape[0], 1))])
    w = np.full(A.shape[0], 1.0 / A.shape[0])
    best, best_err = None, math.inf
    for _ in range(int(lawson) + 1):
        Aw = A * w[:, None]
        G = A.T @ Aw
        G[np.diag_indices_from(G)] += ridge * (np.trace(G) / G.shape[0] + 1e-300)
        coef = np.linalg.solve(G, Aw.T @ T)
        R = np.abs(A @ coef - T).max(axis=1)
        err = float(R.max())
        if err < best_err:
            best, best_err = coef, err
        w = w * R
        w /= w.sum()
    return best[:-1].T, best[-1]


class _Adam:
    def __init__(self, params, lr):
        self.lr = lr
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads, lr):
        self.t += 1
        b1, b2 = 0.9, 0.999
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + 1e-12)


def _refine(net, X, T, iterations, lr, temperature, check=None, check_every=100,
            active=4096, refresh=20):
    """Adam on tau * log(mean(exp(|residual| / tau))), restricted to an active set.

    Every ``refresh`` steps the full residual is recomputed and the ``active``
    worst points are kept; the best net by full maximum residual is returned.
    """
    params = net.params()
    opt = _Adam(params, lr)
    full = np.abs(net.forward(X) - T).max(axis=1)
    best, best_err = net.copy(), float(full.max())
    done = 0
    idx = np.arange(X.shape[0])
    for it in range(1, iterations + 1):
        if (it - 1) % refresh == 0:
            if it > 1:
                full = np.abs(net.forward(X) - T).max(axis=1)
                err = float(full.max())
                if err < best_err:
                    best_err, best = err, net.copy()
                if check is not None and (it - 1) % check_every == 0 and check(best, best_err):
                    break
            k = min(active, X.shape[0])
            idx = np.sort(np.argpartition(-full, k - 1)[:k])
        Xa, Ta = X[idx], T[idx]
        R = net.forward(Xa) - Ta
        A = np.abs(R)
        s = (A - A.max()) / temperature
        # exact zeros instead of denormals, which stall the matmuls
        wgt = np.where(s > -40.0, np.exp(np.maximum(s, -40.0)), 0.0)
        wgt /= wgt.sum()
        gW, gb = net.gradients(Xa, wgt * np.sign(R))
        cos = 0.5 * (1.0 + math.cos(math.pi * it / iterations))
        opt.step(params, gW + gb, lr * (0.05 + 0.95 * cos))
        done = it
    err = float(np.abs(net.forward(X) - T).max())
    if err < best_err:
        best_err, best = err, net.copy()
    return best, best_err, done


def _shallow_init(K, X, T, width, activation, rng, lawson=8):
    dirs, offs = _random_features(K, width, activation, rng)
    act = ACTIVATIONS[activation][0]
    F = act(X @ dirs.T + offs)
    W2, b2 = _readout(F, T, lawson)
    return ShallowNet([dirs, W2], [offs, b2], activation)


def _register_init(K, X, T, depth, q, rng, lawson=8):
    """Width d+q+2 ReLU net that serially evaluates a 2*depth-unit random-feature fit.

    Each hidden layer carries x (d units, shifted positive), carries the q
    running output sums (shifted positive) and computes two new ReLU features.
    """
    d = K.dim
    n_feat = 2 * depth
    dirs, offs = _random_features(K, n_feat, "relu", rng)
    F = _relu(X @ dirs.T + offs)
    C, c0 = _readout(F, T, lawson)
    pad = 1.0
    shift_x = float(np.max(np.abs(np.concatenate([K.lo, K.hi])))) + pad
    partial = np.cumsum(F[:, None, :] * C[None, :, :], axis=2) + c0[None, :, None]
    shift_q = float(max(0.0, -partial.min(), -c0.min())) + pad
    width = d + q + 2
    Ws, bs = [], []
    # first hidden layer: input -> [x + s, acc0 + s, f1, f2]
    W = np.zeros((width, d))
    b = np.zeros(width)
    W[:d] = np.eye(d)
    b[:d] = shift_x
    b[d:d + q] = c0 + shift_q
    W[d + q:] = dirs[0:2]
    b[d + q:] = offs[0:2]
    Ws.append(W)
    bs.append(b)
    for layer in range(1, depth):
        W = np.zeros((width, width))
        b = np.zeros(width)
        W[:d, :d] = np.eye(d)
        W[d:d + q, d:d + q] = np.eye(q)
        W[d:d + q, d + q:] = C[:, 2 * layer - 2:2 * layer]
        new = dirs[2 * layer:2 * layer + 2]
        W[d + q:, :d] = new
        b[d + q:] = offs[2 * layer:2 * layer + 2] - new @ np.full(d, shift_x)
        Ws.append(W)
        bs.append(b)
    W = np.zeros((q, width))
    W[:, d:d + q] = np.eye(q)
    W[:, d + q:] = C[:, 2 * depth - 2:2 * depth]
    Ws.append(W)
    bs.append(np.full(q, -shift_q))
    if depth == 1:
        return ShallowNet(Ws, bs, "relu")
    return MLP(Ws, bs, "relu")


def _default_K(fbar, epsilon, boundary_mode):
    lo, hi = fbar.domain.bounding_box()
    box = Box(lo, hi)
    if boundary_mode == "interior":
        if not (isinstance(fbar.domain, Box) and fbar.domain == box):
            raise ValueError("interior-mode training needs a box-shaped domain (K = M)")
        return box
    return box.inflated(epsilon)


def _default_resolution(K, max_points=60000):
    per_axis = min(240, int(max_points ** (1.0 / K.dim)))
    return float(np.max(K.hi - K.lo)) / per_axis


def fit_network(target, K: Box, builder, X, T, *, budget, lr, temperature, goal=None, cell=None,
                p=2.0, lipschitz=1.0, offset=0.0, rng=None):
    """Phase 1 via ``builder``, then Adam refinement unless already certified.

    Returns ``(net, train_err, certified_sup_error or None, iterations)``.
    """
    net = builder(rng)
    err = float(np.abs(net.forward(X) - T).max())
    cert = None
    if cell is not None and err < goal:
        cert = certified_sup_error(net, target, K, cell, p, lipschitz, goal, offset=offset)
        if cert < goal:
            return net, err, cert, 0
    certified = {}

    def check(best, e):
        if e >= 0.9 * goal:
            return False
        certified[id(best)] = certified_sup_error(best, target, K, cell, p, lipschitz, goal, offset=offset)
        return certified[id(best)] < goal

    best, err, iters = _refine(net, X, T, budget, lr, temperature,
                               check if cell is not None else None)
    cert = certified.get(id(best))
    if cert is None and cell is not None:
        cert = certified_sup_error(best, target, K, cell, p, lipschitz, goal, offset=offset)
    return best, err, cert, iters


def interpolation_fraction(net, H: HField, members, labels):
    if len(members) == 0:
        return 1.0
    want = H.slot_of(labels) + 1
    got = class_prediction(eval_net(net, members))
    return float(np.mean(got == want))


def _train(field, K, p, epsilon, builder_of, width, depth, activation, budget, seed, boundary_mode,
           resolution):
    epsilon = float(epsilon)
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    p = check_p(p)
    fbar = extend(field)
    slack = fbar.base.h_slack(p)
    H = HField(fbar, p, boundary_mode)
    K = _default_K(fbar, epsilon, boundary_mode) if K is None else K
    if not isinstance(K, Box):
        lo, hi = K.bounding_box()
        K = Box(lo, hi)
    res = _default_resolution(K) if resolution is None else float(resolution)
    X = grid_points(K, res)
    T = H(X)
    goal = epsilon / 2.0
    rng = child_rng(seed, _STREAM_TRAIN)
    lr = 2e-3 if activation == "relu" else 5e-3
    net, train_err, cert, iters = fit_network(
        H, K, lambda r: builder_of(K, X, T, r), X, T, budget=budget, lr=lr,
        temperature=goal / 25.0, goal=goal, cell=res / 4.0, p=p, offset=slack, rng=rng)
    mres = stable_set(fbar, epsilon, p, boundary_mode, resolution=res)
    frac = interpolation_fraction(net, H, mres.members, mres.labels)
    vacuous = len(mres) == 0
    success = cert < goal and frac == 1.0
    if cert < goal and frac != 1.0:
        raise AssertionError("sup error below epsilon/2 but interpolation failed")
    rep = TrainReport(cert, goal, iters, frac, success, vacuous, train_err, net.width, net.depth,
                      net.activation, len(mres), list(H.slots))
    return net, rep


def train_shallow(field, K=None, p=2.0, epsilon=0.1, activation="relu", width=64, budget=2000,
                  seed=0, boundary_mode="extension", resolution=None):
    """Fit a one-hidden-layer net to H on K and verify interpolation on the epsilon-stable set.

    ``K`` defaults to the bounding box of M inflated by epsilon (extension
    mode) or M itself (interior mode, box domains). ``budget`` is the number
    of refinement iterations. Returns ``(net, TrainReport)``; on failure the
    best net found is returned with ``success=False``.
    """
    if activation not in ACTIVATIONS:
        raise ValueError(f"activation must be one of {sorted(ACTIVATIONS)}")

    def builder(K, X, T, rng):
        return _shallow_init(K, X, T, int(width), activation, rng)

    return _train(field, K, p, epsilon, builder, width, 1, activation, budget, seed, boundary_mode,
                  resolution)


def train_narrow_deep(field, K=None, p=2.0, epsilon=0.1, activation="relu", depth_budget=16,
                      budget=2000, seed=0, boundary_mode="extension", resolution=None):
    """Width d+q+2 ReLU nets of growing depth (1, 2, 4, ... up to ``depth_budget``).

    Stops at the first depth whose certified sup error is below epsilon/2.
    """
    if activation != "relu":
        raise ValueError("the narrow-deep construction uses relu registers")
    fbar = extend(field)
    q = len(fbar.extended_label_set)
    d = fbar.dim
    depths = []
    k = 1
    while k < depth_budget:
        depths.append(k)
        k *= 2
    depths.append(int(depth_budget))
    result = None
    for depth in depths:
        if depth == 1:
            def builder(K, X, T, rng):
                return _shallow_init(K, X, T, d + q + 2, "relu", rng)
        else:
            def builder(K, X, T, rng, depth=depth):
                return _register_init(K, X, T, depth, q, rng)
        result = _train(field, K, p, epsilon, builder, d + q + 2, depth, "relu", budget, seed,
                        boundary_mode, resolution)
        if result[1].success:
            break
    return result


def verify_net(net, field, K=None, p=2.0, epsilon=0.1, boundary_mode="extension", resolution=None):
    """Re-run the certificate and interpolation check for an existing net.

    Uses the same K, grid and verification cells as training with the same
    arguments. Returns a TrainReport with ``iterations=0``.
    """
    epsilon = float(epsilon)
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    p = check_p(p)
    fbar = extend(field)
    H = HField(fbar, p, boundary_mode)
    if net.input_dim != fbar.dim or net.output_dim != H.q:
        raise ValueError(f"net maps R^{net.input_dim} -> R^{net.output_dim}, "
                         f"field needs R^{fbar.dim} -> R^{H.q}")
    K = _default_K(fbar, epsilon, boundary_mode) if K is None else K
    if not isinstance(K, Box):
        K = Box(*K.bounding_box())
    res = _default_resolution(K) if resolution is None else float(resolution)
    goal = epsilon / 2.0
    X = grid_points(K, res)
    train_err = float(np.abs(net.forward(X) - H(X)).max())
    cert = certified_sup_error(net, H, K, res / 4.0, p, 1.0, goal, offset=fbar.base.h_slack(p))
    mres = stable_set(fbar, epsilon, p, boundary_mode, resolution=res)
    frac = interpolation_fraction(net, H, mres.members, mres.labels)
    return TrainReport(cert, goal, 0, frac, cert < goal and frac == 1.0, len(mres) == 0, train_err,
                       net.width, net.depth, net.activation, len(mres), list(H.slots))


# ---------------------------------------------------------------- nets as label fields

class NetLabels:
    """Label evaluator x -> slots[argmax net(x)]; the reject slot maps to ``reject_as``."""

    def __init__(self, net, slots, reject_as=None):
        self.net = net
        self.slots = np.asarray(slots, dtype=np.int64)
        self.reject_as = reject_as

    def __call__(self, X):
        lab = self.slots[class_prediction(eval_net(self.net, np.asarray(X, float).reshape(-1, self.net.input_dim))) - 1]
        if self.reject_as is not None:
            lab = np.where(lab < 1, self.reject_as, lab)
        return lab


def net_as_field(net, domain, slots, resolution=None):
    """Oracle field of the net's predicted labels on ``domain``.

    ``slots`` lists the label of each output coordinate. A prediction of the
    reject label inside the domain becomes the reserved label max(slots) + 1.
    """
    slots = [int(s) for s in slots]
    labels = sorted({s for s in slots if s >= 1})
    reserved = None
    if any(s < 1 for s in slots):
        reserved = max(labels, default=0) + 1
        labels.append(reserved)
    return OracleField(NetLabels(net, slots, reserved), domain, tuple(labels), resolution=resolution)


def stability_of_net(net, domain, slots, p=2.0, mode="pointwise", boundary_mode="extension",
                     resolution=None, **kw):
    """Class stability of the net's predicted-label field."""
    from .stability import class_stability

    return class_stability(net_as_field(net, domain, slots, resolution), p=p, mode=mode,
                           boundary_mode=boundary_mode, **kw)


# ---------------------------------------------------------------- rounding chain

class LabelBlend:
    """Continuous surrogate g for the label index.

    With weights w_k(x) = max(xi - dist(x, {f = y_k}), 0), g is the weighted
    mean of the indices k = 1..q. It equals k exactly at points farther than
    xi from every other label, and rounds (through the hat functions) to the
    correct index everywhere off the boundary.
    """

    def __init__(self, field, xi, p=2.0):
        self.fbar = extend(field)
        self.labels = tuple(sorted(self.fbar.label_set))
        self.xi = float(xi)
        self.p = check_p(p)

    def __call__(self, X):
        X = self.fbar.base.points(X)
        num = np.zeros(X.shape[0])
        den = np.zeros(X.shape[0])
        for k, lab in enumerate(self.labels, start=1):
            d, _ = self.fbar.base.label_distance(X, lab, self.p)
            w = np.maximum(self.xi - d, 0.0)
            num += k * w
            den += w
        return num / den


@dataclass
class ChainReport:
    epsilon1: float
    epsilon2: float
    xi: float
    target_stability: float
    net_stability: float
    deficit: float
    deficit_std: float
    deficit_bound: float
    mismatch: float
    mismatch_std: float
    anchors: list
    anchors_matched: bool
    attempts: int
    width: int
    samples: int
    success: bool

    @property
    def deficit_ok(self):
        return self.deficit_bound <= self.epsilon1

    @property
    def mismatch_ok(self):
        return self.mismatch <= self.epsilon2

    def to_dict(self):
        d = asdict(self)
        d["deficit_ok"] = self.deficit_ok
        d["mismatch_ok"] = self.mismatch_ok
        return d


def _default_anchors(fbar, n, p, boundary_mode, rng):
    from .distance import boundary_distances

    out = []
    while len(out) < n:
        X = fbar.domain.sample(rng, 4 * n)
        h, _, _ = boundary_distances(fbar, X, p, "pointwise", boundary_mode)
        out.extend(X[h > 0])
    return np.asarray(out[:n])


def rounding_chain(field, epsilon1=0.05, epsilon2=0.05, anchors=None, n_anchors=5, p=2.0,
                   boundary_mode="extension", xi=None, width=512, budget=500, resolution=None,
                   net_resolution=None, samples=10 ** 5, seed=0, max_attempts=3):
    """Fit a net to G = (omega_1(g), ..., omega_q(g)) and verify the stability chain.

    Checks, all on the label field x -> y[argmax net(x)]:

    * stability deficit S(f-bar) - S(net) with paired Monte Carlo samples;
      the bound adds 3 standard errors and the raster error of the net field,
      and must not exceed ``epsilon1``;
    * mismatch measure vol(M) - accuracy must not exceed ``epsilon2``;
    * every anchor point gets its true label.

    A failed check triggers retraining with doubled width and budget.
    """
    from .stability import accuracy_measure, stability_samples

    fbar = extend(field)
    p = check_p(p)
    dom = fbar.domain
    lo, hi = dom.bounding_box()
    K = Box(lo, hi)
    labels = tuple(sorted(fbar.label_set))
    q = len(labels)
    rng = child_rng(seed, _STREAM_TRAIN + 1)
    if anchors is None:
        anchors = _default_anchors(fbar, n_anchors, p, boundary_mode, rng)
    anchors = fbar.base.points(anchors)
    from .distance import boundary_distances

    h_anchor, _, _ = boundary_distances(fbar, anchors, p, "pointwise", boundary_mode)
    if np.any(h_anchor <= 0):
        raise ValueError("anchor points must have positive boundary distance")
    if xi is None:
        xi = min(0.05 * float(np.max(K.hi - K.lo)), 0.5 * float(h_anchor.min()))
    g = LabelBlend(fbar, xi, p)
    res = _default_resolution(K) if resolution is None else float(resolution)
    X = grid_points(K, res)
    X = X[fbar.contains(X)]
    T = compose_G(g(X), q)
    net_res = res / 2.0 if net_resolution is None else float(net_resolution)
    target_vals, vol = stability_samples(fbar, dom, p, "pointwise", boundary_mode, samples, seed)
    s_target = vol * float(np.mean(target_vals))
    truth = fbar.base.predict(anchors)
    report = None
    net = None
    for attempt in range(1, max_attempts + 1):
        w = int(width) * 2 ** (attempt - 1)
        bud = int(budget) * 2 ** (attempt - 1)

        def builder(r, w=w):
            return _shallow_init(K, X, T, w, "relu", r)

        net, _, _, _ = fit_network(None, K, builder, X, T, budget=bud, lr=2e-3, temperature=0.02,
                                   rng=child_rng(seed, _STREAM_TRAIN, attempt))
        nf = net_as_field(net, dom, labels, resolution=net_res)
        net_vals, _ = stability_samples(nf, dom, p, "pointwise", boundary_mode, samples, seed)
        diff = target_vals - net_vals
        deficit = vol * float(np.mean(diff))
        dstd = vol * float(np.std(diff, ddof=1)) / math.sqrt(diff.size)
        bound = deficit + 3.0 * dstd + vol * nf.error_bound(p)
        acc = accuracy_measure(NetLabels(net, labels), fbar, dom, samples, seed)
        mismatch = vol - acc
        frac = acc / vol
        mstd = vol * math.sqrt(max(frac * (1 - frac), 0.0) / samples)
        matched = bool(np.all(NetLabels(net, labels)(anchors) == truth))
        report = ChainReport(float(epsilon1), float(epsilon2), float(xi), s_target,
                             vol * float(np.mean(net_vals)), deficit, dstd, bound, mismatch, mstd,
                             anchors.tolist(), matched, attempt, w, int(samples), False)
        report.success = report.deficit_ok and report.mismatch_ok and matched
        if report.success:
            break
    return net, report
