"""Small differentiable classifiers and the synthetic data they are trained on.

Everything is plain numpy with hand-written reverse mode, so the input
gradient of ``log p(c|x)`` used by the sampler and the attacks is exact.
Inputs are batched row-wise: ``x`` has shape ``(B, D)`` or ``(D,)``.
"""

import copy
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, TrainingFailureError
from .numerics import orthonormal_columns, seeded_rng, spawn_seeds
from .samples import SampleSet

ACTIVATIONS = ("tanh", "softplus", "relu")


@dataclass
class MlpModel:
    """Fully connected classifier; ``layer_dims == (D, K)`` is softmax-linear.

    ``weights[l]`` has shape ``(layer_dims[l], layer_dims[l+1])``.
    """

    layer_dims: tuple
    weights: list
    biases: list
    activation: str = "tanh"
    seed: int = 0

    def __post_init__(self):
        self.layer_dims = tuple(int(v) for v in self.layer_dims)
        if len(self.layer_dims) < 2:
            raise InvalidInputError("need at least input and output dimensions")
        if self.activation not in ACTIVATIONS:
            raise InvalidInputError(f"unknown activation {self.activation!r}")
        if len(self.weights) != len(self.layer_dims) - 1 or len(self.biases) != len(self.weights):
            raise InvalidInputError("one weight matrix and bias vector per layer expected")
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64).ravel() for b in self.biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            shape = (self.layer_dims[i], self.layer_dims[i + 1])
            if w.shape != shape or b.shape != (shape[1],):
                raise InvalidInputError(f"layer {i}: expected weight {shape}, got {w.shape}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise InvalidInputError(f"layer {i} has non-finite parameters")

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def n_classes(self) -> int:
        return self.layer_dims[-1]

    def copy(self) -> "MlpModel":
        return copy.deepcopy(self)

    def params(self):
        return [*self.weights, *self.biases]


def init_mlp(layer_dims, activation="tanh", seed=0) -> MlpModel:
    """Glorot-uniform weights, zero biases."""
    rng = seeded_rng(seed)
    weights, biases = [], []
    for n_in, n_out in zip(layer_dims[:-1], layer_dims[1:]):
        lim = np.sqrt(6.0 / (n_in + n_out))
        weights.append(rng.uniform(-lim, lim, size=(n_in, n_out)))
        biases.append(np.zeros(n_out))
    return MlpModel(tuple(layer_dims), weights, biases, activation, seed)


def zero_model(input_dim, n_classes, hidden=()) -> MlpModel:
    dims = (input_dim, *hidden, n_classes)
    return MlpModel(
        dims,
        [np.zeros((a, b)) for a, b in zip(dims[:-1], dims[1:])],
        [np.zeros(b) for b in dims[1:]],
    )


def _act(name, z):
    if name == "tanh":
        return np.tanh(z)
    if name == "softplus":
        return np.logaddexp(0.0, z)
    return np.maximum(z, 0.0)


def _act_grad(name, z, a):
    if name == "tanh":
        return 1.0 - a * a
    if name == "softplus":
        return 0.5 * (1.0 + np.tanh(0.5 * z))
    return (z > 0).astype(np.float64)


def _check_input(model, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise InvalidInputError(f"input has shape {x.shape}, model expects D={model.input_dim}")
    return x, single


def _forward_cache(model, x):
    zs, acts = [], [x]
    a = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        zs.append(z)
        a = z if i == last else _act(model.activation, z)
        acts.append(a)
    return zs, acts


def log_softmax(logits):
    m = logits.max(axis=1, keepdims=True)
    s = logits - m
    return s - np.log(np.exp(s).sum(axis=1, keepdims=True))


def forward(model: MlpModel, x):
    """``(logits, probs)``; probabilities come from a shifted softmax."""
    x, single = _check_input(model, x)
    _, acts = _forward_cache(model, x)
    logits = acts[-1]
    probs = np.exp(log_softmax(logits))
    if single:
        return logits[0], probs[0]
    return logits, probs


def predict(model, x):
    """Arg-max class; ties go to the lowest index."""
    logits, _ = forward(model, x)
    return np.argmax(logits, axis=-1)


def _backprop_input(model, zs, acts, dlogits):
    delta = dlogits
    last = len(model.weights) - 1
    for i in range(last, -1, -1):
        g = delta @ model.weights[i].T
        if i == 0:
            return g
        delta = g * _act_grad(model.activation, zs[i - 1], acts[i])
    return None


def _labels(c, n, k):
    c = np.broadcast_to(np.asarray(c, dtype=np.int64), (n,))
    if np.any(c < 0) or np.any(c >= k):
        raise InvalidInputError(f"class index out of range 0..{k - 1}")
    return c


def grad_logp(model: MlpModel, x, c):
    """Exact gradient of ``log p(c|x)`` with respect to the input."""
    return logp_and_grad(model, x, c)[1]


def logp_and_grad(model: MlpModel, x, c):
    """``(log p(c|x), d log p(c|x) / dx)``; one forward and one backward pass."""
    x, single = _check_input(model, x)
    c = _labels(c, x.shape[0], model.n_classes)
    zs, acts = _forward_cache(model, x)
    lsm = log_softmax(acts[-1])
    rows = np.arange(x.shape[0])
    d = -np.exp(lsm)
    d[rows, c] += 1.0
    g = _backprop_input(model, zs, acts, d)
    lp = lsm[rows, c]
    if single:
        return lp[0], g[0]
    return lp, g


def loss_and_param_grads(model: MlpModel, x, y):
    """Mean cross-entropy and its gradient for every weight and bias."""
    x, _ = _check_input(model, x)
    y = _labels(y, x.shape[0], model.n_classes)
    n = x.shape[0]
    zs, acts = _forward_cache(model, x)
    lsm = log_softmax(acts[-1])
    rows = np.arange(n)
    loss = -float(lsm[rows, y].mean())
    delta = np.exp(lsm)
    delta[rows, y] -= 1.0
    delta /= n
    n_layers = len(model.weights)
    gw, gb = [None] * n_layers, [None] * n_layers
    for i in range(n_layers - 1, -1, -1):
        gw[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * _act_grad(model.activation, zs[i - 1], acts[i])
    return loss, gw, gb


def accuracy(model, x, y) -> float:
    return float(np.mean(predict(model, x) == np.asarray(y)))


def finite_diff_check(model, x, c, step=1e-5, max_coords=None, seed=0, floor=1e-6):
    """Worst coordinate-wise relative error of :func:`grad_logp` vs central differences.

    Relative error is ``|a - b| / max(|a|, |b|, floor)``; the floor sits well
    above the ``eps * |log p| / step`` cancellation noise of the difference
    quotient. For D above ``max_coords`` a seeded random subset of
    coordinates is checked (at least 64).
    """
    if step <= 0:
        raise InvalidInputError("step must be positive")
    x = np.asarray(x, dtype=np.float64).ravel()
    g = grad_logp(model, x, c)
    coords = np.arange(x.size)
    if max_coords is not None and x.size > max_coords:
        coords = seeded_rng(seed).choice(x.size, size=max(64, int(max_coords)), replace=False)
    pert = np.repeat(x[None, :], 2 * coords.size, axis=0)
    pert[np.arange(coords.size), coords] += step
    pert[coords.size + np.arange(coords.size), coords] -= step
    lp, _ = logp_and_grad(model, pert, c)
    fd = (lp[: coords.size] - lp[coords.size :]) / (2.0 * step)
    a = g[coords]
    return float(np.max(np.abs(a - fd) / np.maximum(np.maximum(np.abs(a), np.abs(fd)), floor)))


@dataclass
class SynthDataset:
    """Per-class points near random low-dimensional affine patches inside [0,1]^D.

    Class ``k`` is ``center[k] + basis[k] @ u`` with ``u`` uniform in
    ``[-half_width[k], half_width[k]]^d_nat``, plus Gaussian noise, clipped to
    the cube.
    """

    ambient_dim: int
    n_classes: int
    intrinsic_dim: int
    noise_sigma: float
    centers: np.ndarray
    bases: list
    half_widths: np.ndarray
    classes: list  # one SampleSet per class
    shrink_retries: int = 0
    seed: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def x(self):
        return np.concatenate([s.points for s in self.classes])

    @property
    def y(self):
        return np.concatenate([np.full(s.n, k) for k, s in enumerate(self.classes)])


def _draw_patch_points(rng, center, basis, half, n, sigma):
    u = rng.uniform(-half, half, size=(n, basis.shape[1]))
    pts = center + u @ basis.T
    if sigma > 0:
        pts = pts + sigma * rng.standard_normal(pts.shape)
    return np.clip(pts, 0.0, 1.0)


def synth_dataset(
    ambient_dim=64,
    n_classes=3,
    intrinsic_dim=4,
    n_per_class=5000,
    noise_sigma=0.02,
    seed=0,
    half_width=0.5,
    center_margin=0.39,
) -> SynthDataset:
    """Synthetic classes on random ``intrinsic_dim``-dimensional affine patches.

    Patch geometry depends only on ``seed``; :func:`resample` draws fresh points
    from the same patches. A patch whose corners leave the cube is shrunk by
    0.95 until it fits; the number of shrinks is kept in ``shrink_retries``.
    """
    D, K, d = int(ambient_dim), int(n_classes), int(intrinsic_dim)
    if K < 2:
        raise InvalidInputError("need at least 2 classes")
    if not 1 <= d < D:
        raise InvalidInputError("need 1 <= d_nat < D")
    geo_seq, pts_seq = spawn_seeds(seed, 2)
    rng = seeded_rng(geo_seq)
    centers = rng.uniform(center_margin, 1.0 - center_margin, size=(K, D))
    bases, halves, retries = [], [], 0
    for k in range(K):
        v = orthonormal_columns(rng, D, d)
        half = float(half_width)
        reach = np.abs(v).sum(axis=1)
        # corner extremes of the patch along every ambient coordinate
        while np.any(centers[k] - half * reach < 0) or np.any(centers[k] + half * reach > 1):
            half *= 0.95
            retries += 1
        bases.append(v)
        halves.append(half)
    ds = SynthDataset(D, K, d, float(noise_sigma), centers, bases, np.array(halves), [], retries, seed)
    return resample(ds, n_per_class, pts_seq)


def resample(ds: SynthDataset, n_per_class, seed) -> SynthDataset:
    """Fresh points from the patches of ``ds`` (held-out sets use a new seed)."""
    rng = seeded_rng(seed)
    classes = []
    for k in range(ds.n_classes):
        pts = _draw_patch_points(rng, ds.centers[k], ds.bases[k], ds.half_widths[k], n_per_class, ds.noise_sigma)
        classes.append(SampleSet(pts, {"source": "synthetic", "label": k, "seed": _seed_int(seed)}))
    out = copy.copy(ds)
    out.classes = classes
    return out


def _seed_int(seed):
    if isinstance(seed, np.random.SeedSequence):
        return int(seed.generate_state(1, np.uint64)[0])
    return int(seed)


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 128
    learning_rate: float = 0.05
    optimizer: str = "sgd"  # "sgd" (momentum) or "adam"
    momentum: float = 0.9
    weight_decay: float = 0.0  # L2 coefficient on weights, not biases
    adv_epsilon: float = 0.0  # L-inf radius; 0 disables adversarial training
    adv_steps: int = 7
    adv_step_size: float = 0.0  # 0 means 2.5 * epsilon / steps
    adv_warmup_epochs: int = 0  # epsilon ramps linearly from 0 over these epochs
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate <= 0:
            raise InvalidInputError("epochs >= 0, batch_size >= 1 and learning_rate > 0 required")
        if self.optimizer not in ("sgd", "adam"):
            raise InvalidInputError(f"unknown optimizer {self.optimizer!r}")
        if not 0 <= self.adv_epsilon < 0.5:
            raise InvalidInputError("adversarial epsilon must lie in [0, 0.5)")

    @property
    def adversarial(self) -> bool:
        return self.adv_epsilon > 0


def train(model: MlpModel, x, y, cfg: TrainConfig):
    """Mini-batch cross-entropy training; returns ``(trained_model, loss_history)``.

    ``loss_history[0]`` is the full-data clean loss before training and each
    later entry the mean batch loss of one epoch (on perturbed batches when
    adversarial). With ``adv_epsilon > 0`` every batch is replaced by its PGD
    perturbation inside the L-inf ball before the gradient step.
    """
    from .attack import pgd_perturb

    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if x.shape[0] == 0 or x.shape[0] != y.shape[0]:
        raise InvalidInputError("dataset is empty or labels do not match inputs")
    m = model.copy()
    history = [loss_and_param_grads(m, x, y)[0]]
    if cfg.epochs == 0:
        return m, history
    rng = seeded_rng(cfg.seed)
    params = m.params()
    vel = [np.zeros_like(p) for p in params]
    sq = [np.zeros_like(p) for p in params]
    t = 0
    step_size = cfg.adv_step_size or 2.5 * cfg.adv_epsilon / cfg.adv_steps
    n = x.shape[0]
    for epoch in range(cfg.epochs):
        eps = cfg.adv_epsilon
        if cfg.adv_warmup_epochs:
            eps *= min(1.0, (epoch + 1) / cfg.adv_warmup_epochs)
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            xb, yb = x[idx], y[idx]
            if cfg.adversarial:
                xb = pgd_perturb(m, xb, yb, eps, cfg.adv_steps, step_size * eps / cfg.adv_epsilon, rng)
            loss, gw, gb = loss_and_param_grads(m, xb, yb)
            if cfg.weight_decay:
                gw = [g + cfg.weight_decay * w for g, w in zip(gw, m.weights)]
            grads = [*gw, *gb]
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
                # parameters are untouched until the update below, so m is the last finite state
                raise TrainingFailureError("training diverged (non-finite loss)", m.copy())
            t += 1
            for p, g, v, s in zip(params, grads, vel, sq):
                if cfg.optimizer == "sgd":
                    v *= cfg.momentum
                    v -= cfg.learning_rate * g
                    p += v
                else:
                    v *= 0.9
                    v += 0.1 * g
                    s *= 0.999
                    s += 0.001 * g * g
                    p -= cfg.learning_rate * (v / (1 - 0.9**t)) / (np.sqrt(s / (1 - 0.999**t)) + 1e-8)
            total += loss * idx.size
        history.append(total / n)
    return m, history
