from __future__ import annotations

import math

import numpy as np
import pytest

from stlcrl.nn import (
    LOG_STD_MAX,
    LOG_STD_MIN,
    FLUSH_EVERY,
    MOMENT_FLUSH,
    Adam,
    GaussianPolicy,
    Mlp,
    load_checkpoint,
    save_checkpoint,
    soft_update,
    squashed_gaussian,
)

trapezoid = getattr(np, "trapezoid", None) or np.trapz

FD_STEP = 1e-6
# relative error uses this floor only when both values are below it
REL_FLOOR = 1e-12
LD = np.longdouble


def rel_err(a, n):
    a, n = np.asarray(a, dtype=float), np.asarray(n, dtype=float)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), REL_FLOOR)


# Reference forward passes in extended precision. Finite differences taken
# on these have roundoff near 1e-13, small enough to resolve gradient entries
# of order 1e-8 that float64 differences cannot.


def ref_mlp(params, x, out_act):
    h = np.asarray(x, dtype=LD)
    n = len(params) // 2
    for i in range(n):
        h = h @ params[2 * i] + params[2 * i + 1]
        if i < n - 1:
            h = np.where(h > 0, h, LD(0))
        elif out_act == "tanh":
            h = np.tanh(h)
    return h


def ref_policy(params, obs, eps, act_dim):
    out = ref_mlp(params, obs, "identity")
    mean = out[:, :act_dim]
    log_std = np.clip(out[:, act_dim:], LOG_STD_MIN, LOG_STD_MAX)
    eps = np.asarray(eps, dtype=LD)
    u = mean + np.exp(log_std) * eps
    a = np.tanh(u)
    half_log_2pi = np.log(LD(2) * np.pi) / 2
    logp = np.sum(-eps * eps / 2 - log_std - half_log_2pi - np.log(1 - a * a), axis=1)
    return a, logp


def _fd(loss, arr, idx):
    old = arr[idx]
    arr[idx] = old + LD(FD_STEP)
    lp = loss()
    arr[idx] = old - LD(FD_STEP)
    lm = loss()
    arr[idx] = old
    return (lp - lm) / (2 * LD(FD_STEP))


def _coords(rng, shape, n):
    size = int(np.prod(shape))
    flat = rng.choice(size, size=min(n, size), replace=False)
    return [np.unravel_index(i, shape) for i in flat]


def check_mlp_gradients(net: Mlp, x, rng, n_coords=8) -> float:
    """Max relative error of parameter and input gradients of ``sum(G * net(x))``."""
    G = rng.normal(size=(len(x), net.n_out))
    net.forward(x, record=True)
    grads, gx = net.backward(G)
    params = [p.astype(LD) for p in net.params]
    xl = x.astype(LD)
    loss = lambda: np.sum(G * ref_mlp(params, xl, net.out_act))  # noqa: E731
    worst = 0.0
    for p, g in zip(params, grads):
        for idx in _coords(rng, p.shape, n_coords):
            worst = max(worst, float(rel_err(g[idx], _fd(loss, p, idx))))
    for idx in _coords(rng, x.shape, n_coords):
        worst = max(worst, float(rel_err(gx[idx], _fd(loss, xl, idx))))
    return worst


def check_policy_gradients(pol: GaussianPolicy, obs, rng, n_coords=8) -> float:
    n = len(obs)
    eps = rng.normal(size=(n, pol.act_dim))
    ga = rng.normal(size=(n, pol.act_dim))
    gl = rng.normal(size=n)
    pol.sample(obs, eps, record=True)
    grads = pol.backward(ga, gl)
    params = [p.astype(LD) for p in pol.params]

    def loss():
        a, logp = ref_policy(params, obs, eps, pol.act_dim)
        return np.sum(ga * a) + np.sum(gl * logp)

    worst = 0.0
    for p, g in zip(params, grads):
        for idx in _coords(rng, p.shape, n_coords):
            worst = max(worst, float(rel_err(g[idx], _fd(loss, p, idx))))
    return worst


def test_reference_forward_agrees_with_float64():
    rng = np.random.default_rng(0)
    pol = GaussianPolicy(4, 2, (8, 8), rng=rng)
    obs, eps = rng.normal(size=(3, 4)), rng.normal(size=(3, 2))
    a, logp = pol.sample(obs, eps)
    ra, rlogp = ref_policy([p.astype(LD) for p in pol.params], obs, eps, 2)
    np.testing.assert_allclose(a, ra.astype(float), rtol=1e-12)
    np.testing.assert_allclose(logp, rlogp.astype(float), rtol=1e-12)


ARCHITECTURES = [
    # (kind, obs_dim, act_dim, hidden): the benchmark nets with and without pre-processing
    ("critic", 5, 2, (256, 256)),
    ("critic", 300, 2, (256, 256)),
    ("actor", 5, 2, (256, 256)),
    ("policy", 5, 2, (256, 256)),
    ("policy", 300, 2, (256, 256)),
    ("critic", 3, 1, (16, 8)),
    ("actor", 4, 3, (7,)),
    ("policy", 2, 1, (9, 9, 9)),
]


def build(kind, obs_dim, act_dim, hidden, rng):
    if kind == "critic":
        return Mlp([obs_dim + act_dim, *hidden, 1], rng=rng)
    if kind == "actor":
        return Mlp([obs_dim, *hidden, act_dim], out_act="tanh", rng=rng)
    return GaussianPolicy(obs_dim, act_dim, hidden, rng=rng)


def gradient_check_case(seed: int) -> float:
    rng = np.random.default_rng(seed)
    kind, obs_dim, act_dim, hidden = ARCHITECTURES[seed % len(ARCHITECTURES)]
    net = build(kind, obs_dim, act_dim, hidden, rng)
    batch = int(rng.integers(1, 6))
    if kind == "policy":
        return check_policy_gradients(net, rng.normal(size=(batch, obs_dim)), rng)
    x = rng.normal(size=(batch, net.n_in))
    return check_mlp_gradients(net, x, rng)


@pytest.mark.parametrize("seed", range(16))
def test_gradients_match_finite_differences(seed):
    assert gradient_check_case(seed) < 1e-4


def test_backward_without_forward_raises():
    net = Mlp([2, 3, 1])
    with pytest.raises(RuntimeError):
        net.backward(np.ones((1, 1)))
    with pytest.raises(RuntimeError):
        GaussianPolicy(2, 1, (3,)).backward(np.ones((1, 1)), np.ones(1))


def test_mlp_shapes_and_validation():
    rng = np.random.default_rng(0)
    net = Mlp([4, 8, 2], out_act="tanh", rng=rng)
    y = net.forward(rng.normal(size=(5, 4)))
    assert y.shape == (5, 2) and np.all(np.abs(y) < 1)
    with pytest.raises(ValueError):
        net.forward(np.ones((1, 3)))
    with pytest.raises(ValueError):
        Mlp([2, 2], out_act="relu")


def test_copy_is_independent():
    net = Mlp([2, 3, 1], rng=np.random.default_rng(0))
    other = net.copy()
    other.params[0][0, 0] += 1.0
    assert net.params[0][0, 0] != other.params[0][0, 0]
    assert all(p.base is other.flat for p in other.params)


def test_params_are_views_of_flat_buffer():
    net = Mlp([3, 5, 2], rng=np.random.default_rng(0))
    assert net.flat.size == 3 * 5 + 5 + 5 * 2 + 2
    np.testing.assert_array_equal(net.flat, np.concatenate([p.ravel() for p in net.params]))
    net.flat[:] = 0.0
    assert all(not p.any() for p in net.params)


def test_backward_gradients_share_one_buffer():
    rng = np.random.default_rng(3)
    net = Mlp([3, 5, 2], rng=rng)
    net.forward(rng.normal(size=(4, 3)), record=True)
    grads, _ = net.backward(rng.normal(size=(4, 2)))
    base = grads[0].base
    assert base is not None and base.size == net.flat.size
    assert all(g.base is base for g in grads)


# -- Adam ------------------------------------------------------------------------


def test_adam_matches_reference_recursion():
    rng = np.random.default_rng(1)
    p = rng.normal(size=(3, 2))
    ref = p.copy()
    opt = Adam([p], lr=0.01)
    m = np.zeros_like(ref)
    v = np.zeros_like(ref)
    for t in range(1, 30):
        g = rng.normal(size=p.shape)
        opt.step([g.copy()])
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        ref = ref - 0.01 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
    np.testing.assert_allclose(p, ref, rtol=1e-12, atol=1e-14)


def test_adam_whole_buffer_matches_per_array_update():
    rng = np.random.default_rng(4)
    net = Mlp([3, 6, 6, 2], rng=rng)
    loose = [p.copy() for p in net.params]
    packed_opt, loose_opt = Adam(net.params, lr=0.01), Adam(loose, lr=0.01)
    for _ in range(20):
        net.forward(rng.normal(size=(8, 3)), record=True)
        grads, _ = net.backward(rng.normal(size=(8, 2)))
        packed_opt.step(grads)
        loose_opt.step([g.copy() for g in grads])
    for p, q in zip(net.params, loose):
        np.testing.assert_array_equal(p, q)
    for a, b in zip(packed_opt.m + packed_opt.v, loose_opt.m + loose_opt.v):
        np.testing.assert_array_equal(a, b)


def test_adam_first_step_moves_by_lr():
    p = np.array([1.0, -2.0])
    Adam([p], lr=0.1).step([np.array([5.0, -0.3])])
    np.testing.assert_allclose(p, [0.9, -1.9], rtol=1e-6)


def test_adam_zero_gradient_leaves_parameters():
    p = np.array([1.0, 2.0])
    Adam([p], lr=0.1).step([np.zeros(2)])
    np.testing.assert_array_equal(p, [1.0, 2.0])


def test_adam_rejects_mismatched_gradients():
    p = np.zeros(3)
    opt = Adam([p], lr=0.1)
    with pytest.raises(ValueError):
        opt.step([np.zeros(2)])
    with pytest.raises(ValueError):
        opt.step([])


def test_adam_flushes_vanishing_moments():
    p = np.ones(3)
    opt = Adam([p], lr=0.1)
    opt.m[0][...] = [1e-249, 1e-3, 0.0]
    opt.v[0][...] = [1e-251, 1e-3, 0.0]
    for _ in range(FLUSH_EVERY):
        opt.step([np.zeros(3)])
    np.testing.assert_array_equal(opt.m[0][[0, 2]], 0.0)
    np.testing.assert_array_equal(opt.v[0][[0, 2]], 0.0)
    assert opt.m[0][1] > MOMENT_FLUSH and opt.v[0][1] > MOMENT_FLUSH
    np.testing.assert_array_equal(p[[0, 2]], 1.0)


def test_adam_minimises_quadratic():
    p = np.array([3.0, -4.0])
    opt = Adam([p], lr=0.05)
    for _ in range(2000):
        opt.step([2 * p])
    assert np.all(np.abs(p) < 1e-3)


# -- soft update -----------------------------------------------------------------


def test_soft_update_is_exact_convex_combination():
    rng = np.random.default_rng(2)
    main = Mlp([3, 4, 1], rng=rng)
    target = Mlp([3, 4, 1], rng=rng)
    before = [p.copy() for p in target.params]
    soft_update(target, main, 0.01)
    for b, p, t in zip(before, main.params, target.params):
        np.testing.assert_array_equal(t, 0.01 * p + (1 - 0.01) * b)
    soft_update(target, main, 1.0)
    for p, t in zip(main.params, target.params):
        np.testing.assert_array_equal(t, p)
    with pytest.raises(ValueError):
        soft_update(target, main, 0.0)
    with pytest.raises(ValueError):
        soft_update(Mlp([3, 5, 1], rng=rng), main, 0.5)


# -- squashed Gaussian ------------------------------------------------------------


def test_squashed_gaussian_log_density_normalises():
    for mean, log_std in [(0.0, 0.0), (1.3, -0.5), (-2.0, 0.7), (0.4, -2.0)]:
        u = np.linspace(mean - 12 * math.exp(log_std), mean + 12 * math.exp(log_std), 200001)
        eps = (u - mean) / math.exp(log_std)
        a, logp = squashed_gaussian(np.full((len(u), 1), mean), np.full((len(u), 1), log_std), eps[:, None])
        # integrate p(a) da = p(a(u)) (1 - tanh(u)^2) du
        integrand = np.exp(logp) * (1 - a[:, 0] ** 2)
        assert trapezoid(integrand, u) == pytest.approx(1.0, abs=1e-6)


def test_squashed_gaussian_matches_closed_form():
    rng = np.random.default_rng(3)
    mean = rng.normal(size=(50, 2))
    log_std = rng.uniform(-2, 1, size=(50, 2))
    eps = rng.normal(size=(50, 2))
    a, logp = squashed_gaussian(mean, log_std, eps)
    std = np.exp(log_std)
    u = mean + std * eps
    ref = np.sum(-0.5 * eps**2 - np.log(std * math.sqrt(2 * math.pi)) - np.log(1 - np.tanh(u) ** 2), axis=1)
    np.testing.assert_allclose(a, np.tanh(u))
    np.testing.assert_allclose(logp, ref, rtol=1e-10)


def test_squashed_gaussian_stable_for_saturated_actions():
    a, logp = squashed_gaussian(np.array([[30.0]]), np.array([[0.0]]), np.array([[0.0]]))
    assert a[0, 0] == 1.0
    assert np.isfinite(logp[0])


def test_squashed_gaussian_monte_carlo_mean():
    rng = np.random.default_rng(4)
    eps = rng.normal(size=(200000, 1))
    a, _ = squashed_gaussian(np.zeros((1, 1)) + 0.5, np.zeros((1, 1)), eps)
    # E[tanh(0.5 + Z)] by quadrature
    z = np.linspace(-10, 10, 20001)
    expected = trapezoid(np.tanh(0.5 + z) * np.exp(-z**2 / 2) / math.sqrt(2 * math.pi), z)
    assert abs(a.mean() - expected) < 4 * a.std() / math.sqrt(len(a))


def test_policy_log_std_is_clamped():
    pol = GaussianPolicy(1, 1, (2,), rng=np.random.default_rng(0))
    pol.net.params[-1][1] = 50.0  # log-std bias far above the clamp
    _, log_std, mask = pol._head(pol.net.forward(np.zeros((1, 1))))
    assert log_std[0, 0] == LOG_STD_MAX and not mask[0, 0]
    pol.net.params[-1][1] = -50.0
    _, log_std, _ = pol._head(pol.net.forward(np.zeros((1, 1))))
    assert log_std[0, 0] == LOG_STD_MIN


def test_policy_mean_action_in_box():
    pol = GaussianPolicy(3, 2, (8,), rng=np.random.default_rng(0))
    a = pol.mean_action(np.random.default_rng(1).normal(size=(10, 3)) * 100)
    assert a.shape == (10, 2) and np.all(np.abs(a) <= 1)


# -- checkpoints --------------------------------------------------------------------


def test_checkpoint_round_trip(tmp_path):
    arrays = {"a.0": np.arange(6.0).reshape(2, 3), "b": np.array([1.5])}
    save_checkpoint(tmp_path / "sub" / "c.npz", arrays, {"algorithm": "sac", "step": 3})
    got, meta = load_checkpoint(tmp_path / "sub" / "c.npz")
    assert meta["algorithm"] == "sac" and meta["step"] == 3 and meta["version"] == 1
    assert set(got) == set(arrays)
    for k in arrays:
        np.testing.assert_array_equal(got[k], arrays[k])


def test_checkpoint_version_checked(tmp_path):
    import json

    path = tmp_path / "c.npz"
    np.savez(path, __meta__=np.array(json.dumps({"version": 99})))
    with pytest.raises(ValueError, match="version"):
        load_checkpoint(path)
