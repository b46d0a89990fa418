"""L-infinity PGD attacks and attack-based robust accuracy.

Robust accuracy measured with a finite attack is an upper bound on the true
value: a point counts as robust only because this attack failed on it.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .model import _labels, forward, logp_and_grad
from .numerics import seeded_rng


@dataclass(frozen=True)
class AttackConfig:
    epsilon: float = 0.06
    steps: int = 20
    step_size: float = 0.0  # 0 means epsilon / 4
    restarts: int = 1
    targeted: bool = False
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.epsilon < 0.5:
            raise InvalidInputError("epsilon must lie in [0, 0.5)")
        if self.steps < 0 or self.restarts < 1:
            raise InvalidInputError("steps >= 0 and restarts >= 1 required")
        if self.step_size < 0 or (self.step_size > self.epsilon and self.epsilon > 0):
            raise InvalidInputError("step size must lie in (0, epsilon]")

    @property
    def eta(self) -> float:
        return self.step_size or self.epsilon / 4.0


@dataclass
class AttackResult:
    """Batched outcome; ``adversarial[i]`` is meaningful only where ``success[i]``."""

    success: np.ndarray
    adversarial: np.ndarray
    iterations: np.ndarray
    margin: np.ndarray  # true-class logit minus best other logit at the reported point
    clean_correct: np.ndarray

    def rows(self):
        for i in range(self.success.size):
            yield {
                "index": i,
                "clean_correct": int(self.clean_correct[i]),
                "attack_success": int(self.success[i]),
                "iterations": int(self.iterations[i]),
                "margin": repr(float(self.margin[i])),
            }


def project_linf(x_adv, x, eps):
    """Nearest point of ``{|delta|_inf <= eps} ∩ [0,1]^D``, exact in floating point."""
    out = np.clip(x_adv, np.maximum(x - eps, 0.0), np.minimum(x + eps, 1.0))
    # x + eps can round above the true bound; step inward until the constraint holds exactly
    for _ in range(4):
        hi = out - x > eps
        lo = x - out > eps
        if not (hi.any() or lo.any()):
            break
        out[hi] = np.nextafter(out[hi], -np.inf)
        out[lo] = np.nextafter(out[lo], np.inf)
    return out


def _margin(logits, y):
    rows = np.arange(y.size)
    true = logits[rows, y]
    other = logits.copy()
    other[rows, y] = -np.inf
    return true - other.max(axis=1)


def _ascent_dir(model, x, y, target):
    # untargeted: increase cross-entropy of the true class; targeted: increase log p(target)
    if target is None:
        return -logp_and_grad(model, x, y)[1]
    return logp_and_grad(model, x, target)[1]


def pgd_perturb(model, x, y, eps, steps, step_size, rng, random_start=True):
    """Final PGD iterate for a batch (no early stopping); used for adversarial training."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    adv = x.copy()
    if random_start and eps > 0:
        adv = project_linf(x + rng.uniform(-eps, eps, size=x.shape), x, eps)
    for _ in range(steps):
        adv = project_linf(adv + step_size * np.sign(_ascent_dir(model, adv, y, None)), x, eps)
    return adv


def _fooled(logits, y, target):
    pred = np.argmax(logits, axis=1)
    return pred == target if target is not None else pred != y


def attack_batch(model, x, y, cfg: AttackConfig, target=None) -> AttackResult:
    """Multi-restart PGD on every row; stops per point at the first fooling iterate.

    Restart 0 starts at the clean point, restart ``r > 0`` at a uniform random
    point of the feasible set drawn from stream ``(cfg.seed, r)``, so adding
    restarts only adds attempts.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    n = x.shape[0]
    y = _labels(y, n, model.n_classes)
    if target is not None:
        target = _labels(target, n, model.n_classes)
    if np.any(x < 0) or np.any(x > 1):
        raise InvalidInputError("attack inputs must lie in the unit hypercube")
    eps, eta = cfg.epsilon, cfg.eta

    logits, _ = forward(model, x)
    clean_correct = np.argmax(logits, axis=1) == y
    success = _fooled(logits, y, target)
    adversarial = x.copy()
    iterations = np.zeros(n, dtype=np.int64)
    margin = _margin(logits, y)

    if eps > 0 and cfg.steps > 0:
        for r in range(cfg.restarts):
            todo = np.flatnonzero(~success)
            if todo.size == 0:
                break
            x0 = x[todo]
            yt = y[todo]
            tt = None if target is None else target[todo]
            if r == 0:
                adv = x0.copy()
            else:
                rng = seeded_rng(np.random.SeedSequence(cfg.seed, spawn_key=(r,)))
                adv = project_linf(x0 + rng.uniform(-eps, eps, size=x0.shape), x0, eps)
            live = np.ones(todo.size, dtype=bool)
            for step in range(1, cfg.steps + 1):
                idx = np.flatnonzero(live)
                if idx.size == 0:
                    break
                d = _ascent_dir(model, adv[idx], yt[idx], None if tt is None else tt[idx])
                adv[idx] = project_linf(adv[idx] + eta * np.sign(d), x0[idx], eps)
                lg, _ = forward(model, adv[idx])
                hit = _fooled(lg, yt[idx], None if tt is None else tt[idx])
                iterations[todo[idx]] += 1
                done = idx[hit]
                gi = todo[done]
                success[gi] = True
                adversarial[gi] = adv[done]
                margin[gi] = _margin(lg[hit], yt[done])
                live[done] = False
    return AttackResult(success, adversarial, iterations, margin, clean_correct)


def pgd_attack(model, x, label, cfg: AttackConfig, target=None):
    """Adversarial point for one input, or ``None`` if every restart failed."""
    res = attack_batch(model, np.asarray(x, dtype=np.float64)[None, :], [label], cfg, target=None if target is None else [target])
    return res.adversarial[0] if res.success[0] else None


def robust_accuracy(model, x, y, cfg: AttackConfig) -> float:
    """Fraction of points that are correctly classified and survive the attack."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] == 0:
        raise InvalidInputError("empty dataset")
    res = attack_batch(model, x, y, cfg)
    return float(np.mean(res.clean_correct & ~res.success))


def robust_accuracy_sweep(model, x, y, epsilons, cfg: AttackConfig):
    """Robust accuracy at increasing radii.

    A point broken at some radius stays broken at every larger one, since the
    adversarial example found there is feasible for the larger ball.
    """
    eps = [float(e) for e in epsilons]
    if any(b < a for a, b in zip(eps, eps[1:])):
        raise InvalidInputError("epsilons must be nondecreasing")
    x = np.asarray(x, dtype=np.float64)
    broken = np.zeros(x.shape[0], dtype=bool)
    out = []
    for e in eps:
        step = cfg.step_size if 0 < cfg.step_size <= e else 0.0
        res = attack_batch(model, x, y, AttackConfig(e, cfg.steps, step, cfg.restarts, cfg.targeted, cfg.seed))
        broken |= res.success | ~res.clean_correct
        out.append(float(np.mean(~broken)))
    return out
