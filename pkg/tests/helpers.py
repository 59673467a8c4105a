"""Builders shared by the policy, trainer and acceptance tests."""

import numpy as np

from socnav.autodiff import Tape, numeric_grad
from socnav.policy import Batch, NetConfig, forward_tape, init_params, unroll

TINY = NetConfig(rays=16, hidden=8, enc1=16, enc2=8, goal_dim=8, risk_hidden=8, m_max=3,
                 horizon=4)
HEADS = ("actor", "critic", "count", "pos", "traj", "risk")


def random_batch(cfg, T, B, rng, starts_mid=True):
    M, H = cfg.m_max, cfg.horizon
    starts = np.zeros((T, B))
    starts[0] = 1.0
    if starts_mid and T > 2:
        starts[T // 2, 0] = 1.0
    count = rng.integers(0, M + 1, (T, B))
    mask = np.arange(M)[None, None] < count[..., None]
    risk = np.where(mask, rng.uniform(0, 1, (T, B, M)), 0.0)
    return Batch(depth=rng.uniform(0, cfg.d_max, (T, B, cfg.rays)),
                 goal=np.concatenate([rng.uniform(0, 5, (T, B, 1)),
                                      rng.uniform(-3, 3, (T, B, 3))], axis=-1),
                 starts=starts, init_state=rng.normal(0, 0.3, (cfg.layers, B, cfg.hidden)),
                 actions=rng.integers(0, 4, (T, B)), old_logp=rng.uniform(-2.0, -0.8, (T, B)),
                 advantages=rng.normal(size=(T, B)), returns=rng.normal(size=(T, B)),
                 count=count, positions=rng.normal(size=(T, B, M, 2)) * mask[..., None],
                 futures=rng.normal(size=(T, B, M, H, 2)) * mask[..., None, None],
                 mask=mask, risk=risk)


def random_params(cfg, seed, scale=0.5):
    """Initial weights plus noisy biases so no unit sits exactly on a kink."""
    rng = np.random.default_rng(seed)
    p = init_params(cfg, seed)
    return {k: v + rng.normal(0, scale * 0.2, v.shape) if v.ndim == 1 else v * scale * 2
            for k, v in p.items()}


def _head_output(o, head):
    return {"actor": o.logits, "critic": o.value, "count": o.count, "pos": o.positions,
            "traj": o.futures, "risk": o.risk}[head]


def head_scalar(tape, params, cfg, batch, head, proj):
    outs = unroll(tape, params, cfg, batch, aux=True)
    vals = tape.stack([_head_output(o, head) for o in outs])
    return tape.sum(tape.mul(vals, tape.const(proj)))


def gradcheck(loss_fn, params, eps=1e-5):
    """Max elementwise relative error between tape and central-difference gradients.

    ``loss_fn(tape, params)`` returns a scalar Var.
    """
    tape = Tape()
    tape.backward(loss_fn(tape, params))
    analytic = tape.grads()
    worst = 0.0
    for name in sorted(params):
        def f():
            return float(loss_fn(Tape(record=False), params).value)
        num = numeric_grad(f, params[name], eps)
        a = analytic[name]
        den = np.maximum(np.maximum(np.abs(a), np.abs(num)), 1e-6)
        worst = max(worst, float(np.max(np.abs(a - num) / den)))
    return worst


def head_gradcheck(head, seed=0, T=3, B=2, cfg=TINY):
    rng = np.random.default_rng(seed)
    params = random_params(cfg, seed)
    batch = random_batch(cfg, T, B, rng)
    probe = Tape(record=False)
    shape = head_scalar_shape(probe, params, cfg, batch, head)
    proj = rng.normal(size=shape)
    return gradcheck(lambda t, p: head_scalar(t, p, cfg, batch, head, proj), params)


def head_scalar_shape(tape, params, cfg, batch, head):
    outs = unroll(tape, params, cfg, batch, aux=True)
    return (len(outs),) + _head_output(outs[0], head).value.shape


def single_step(params, cfg, depth, goal, state):
    t = Tape(record=False)
    return forward_tape(t, params, cfg, depth, goal, state)
