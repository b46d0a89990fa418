import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pmanifold.attack import (
    AttackConfig,
    attack_batch,
    pgd_attack,
    project_linf,
    robust_accuracy,
    robust_accuracy_sweep,
)
from pmanifold.errors import InvalidInputError
from pmanifold.model import accuracy, forward, init_mlp, predict, zero_model
from pmanifold.numerics import seeded_rng


@pytest.fixture(scope="module")
def small():
    m = init_mlp((10, 8, 3), seed=2)
    m.weights[0] *= 3
    x = seeded_rng(1).random((60, 10))
    return m, x, predict(m, x)


def test_zero_epsilon_never_attacks(small):
    m, x, y = small
    assert pgd_attack(m, x[0], int(y[0]), AttackConfig(epsilon=0.0)) is None
    wrong = (int(y[0]) + 1) % 3
    # already misclassified points are returned as they are
    assert np.array_equal(pgd_attack(m, x[0], wrong, AttackConfig(epsilon=0.0)), x[0])


def test_zero_epsilon_robust_equals_clean(small):
    m, x, _ = small
    y = seeded_rng(3).integers(0, 3, x.shape[0])
    assert robust_accuracy(m, x, y, AttackConfig(epsilon=0.0)) == accuracy(m, x, y)


def test_zero_model_cannot_be_moved():
    m = zero_model(4, 3)
    assert pgd_attack(m, np.full(4, 0.5), 0, AttackConfig(epsilon=0.1)) is None


def test_random_model_near_chance():
    m = init_mlp((10, 3), seed=5)
    rng = seeded_rng(6)
    x, y = rng.random((600, 10)), rng.integers(0, 3, 600)
    assert robust_accuracy(m, x, y, AttackConfig(epsilon=0.05)) <= 1 / 3 + 0.06


@given(st.integers(0, 10_000), st.floats(0.005, 0.3))
def test_adversarial_points_feasible(seed, eps):
    m = init_mlp((10, 8, 3), seed=2)
    m.weights[0] *= 3
    x = seeded_rng(seed).random((20, 10))
    y = predict(m, x)
    res = attack_batch(m, x, y, AttackConfig(epsilon=eps, steps=10, restarts=2, seed=seed))
    adv = res.adversarial[res.success]
    assert np.all(np.abs(adv - x[res.success]) <= eps)
    assert np.all((adv >= 0) & (adv <= 1))
    assert np.all(predict(m, adv) != y[res.success])


@given(st.integers(0, 10_000))
def test_projection_exact(seed):
    rng = seeded_rng(seed)
    x = rng.random(50)
    eps = float(rng.uniform(0, 0.4))
    p = project_linf(x + rng.normal(0, 1, 50), x, eps)
    assert np.all(np.abs(p - x) <= eps) and np.all((p >= 0) & (p <= 1))


def test_sweep_monotone(small):
    m, x, y = small
    accs = robust_accuracy_sweep(m, x, y, [0.0, 0.01, 0.02, 0.05, 0.1], AttackConfig(steps=10, restarts=2))
    assert all(b <= a for a, b in zip(accs, accs[1:]))


def test_restarts_never_increase_robust_accuracy(small):
    m, x, y = small
    accs = [robust_accuracy(m, x, y, AttackConfig(epsilon=0.03, steps=5, restarts=r, seed=1)) for r in (1, 2, 4)]
    assert accs[0] >= accs[1] >= accs[2]


def test_targeted_reaches_target(small):
    m, x, y = small
    target = (y + 1) % 3
    res = attack_batch(m, x, y, AttackConfig(epsilon=0.3, steps=40), target=target)
    assert np.array_equal(predict(m, res.adversarial[res.success]), target[res.success])


def test_margin_negative_when_fooled(small):
    m, x, y = small
    res = attack_batch(m, x, y, AttackConfig(epsilon=0.2, steps=20))
    assert np.all(res.margin[res.success & res.clean_correct] <= 0)


def test_config_validation():
    with pytest.raises(InvalidInputError):
        AttackConfig(epsilon=0.5)
    with pytest.raises(InvalidInputError):
        AttackConfig(epsilon=0.01, step_size=0.02)


def test_toy_standard_is_fragile(toy_models, toy_test_set):
    m = toy_models["standard"]
    res = attack_batch(m, toy_test_set.x, toy_test_set.y, AttackConfig(epsilon=0.06, steps=20, restarts=2))
    assert res.success[res.clean_correct].mean() >= 0.9


def test_adversarial_training_raises_robust_accuracy(toy_models, toy_test_set):
    x, y = toy_test_set.x, toy_test_set.y
    cfg = AttackConfig(epsilon=0.06, steps=20, restarts=2)
    assert robust_accuracy(toy_models["at0.06"], x, y, cfg) > robust_accuracy(toy_models["standard"], x, y, cfg)
