import numpy as np
import pytest

from socnav.autodiff import Tape, numeric_grad


def rel_err(a, b):
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-6)))


def check(build, *arrays, tol=1e-6, seed=0):
    """Compare tape gradients of ``sum(build(...) * R)`` against central differences."""
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    tape = Tape()
    vs = [tape.param(f"x{i}", a) for i, a in enumerate(arrays)]
    out = build(tape, *vs)
    proj = np.random.default_rng(seed).normal(size=out.value.shape)
    loss = tape.sum(tape.mul(out, tape.const(proj)))
    tape.backward(loss)
    grads = tape.grads()

    def f():
        t = Tape(record=False)
        return float((build(t, *[t.const(a) for a in arrays]).value * proj).sum())
    for i, a in enumerate(arrays):
        num = numeric_grad(f, a)
        assert grads[f"x{i}"].shape == a.shape
        assert rel_err(grads[f"x{i}"], num) < tol, f"input {i}"


rng = np.random.default_rng(1)
A = rng.normal(size=(3, 4))
B = rng.normal(size=(3, 4))
ROW = rng.normal(size=(4,))


def away_from_zero(x, gap=0.05):
    return np.where(np.abs(x) < gap, gap * np.sign(x + 1e-12) * 2, x)


@pytest.mark.parametrize("name,build,args", [
    ("add", lambda t, a, b: t.add(a, b), (A, B)),
    ("add_broadcast", lambda t, a, b: t.add(a, b), (A, ROW)),
    ("sub", lambda t, a, b: t.sub(a, b), (A, ROW)),
    ("mul", lambda t, a, b: t.mul(a, b), (A, B)),
    ("mul_broadcast", lambda t, a, b: t.mul(a, b), (A, ROW[None])),
    ("scale", lambda t, a: t.scale(a, -1.7), (A,)),
    ("square", lambda t, a: t.square(a), (A,)),
    ("exp", lambda t, a: t.exp(a), (A,)),
    ("relu", lambda t, a: t.relu(a), (away_from_zero(A),)),
    ("sigmoid", lambda t, a: t.sigmoid(a), (A * 3,)),
    ("tanh", lambda t, a: t.tanh(a), (A,)),
    ("clip", lambda t, a: t.clip(a, -0.5, 0.5), (np.array([[-0.9, -0.3, 0.2, 0.7],
                                                           [0.45, -0.6, 1.3, -0.05]]),)),
    ("minimum", lambda t, a, b: t.minimum(a, b), (A, A + away_from_zero(B))),
    ("sum_all", lambda t, a: t.sum(a), (A,)),
    ("sum_axis", lambda t, a: t.sum(a, axis=1), (A,)),
    ("mean", lambda t, a: t.mean(a), (A,)),
    ("reshape", lambda t, a: t.reshape(a, (2, 6)), (A,)),
    ("stack", lambda t, a, b: t.stack([a, b, a]), (A, B)),
    ("concat", lambda t, a, b: t.concat([a, b]), (A, B[:, :2])),
    ("take", lambda t, a: t.take(a, np.array([0, 3, 1])), (A,)),
    ("log_softmax", lambda t, a: t.log_softmax(a), (A,)),
    ("linear", lambda t, x, w, b: t.linear(x, w, b), (A, rng.normal(size=(4, 5)),
                                                      rng.normal(size=5))),
    ("linear_nobias_3d", lambda t, x, w: t.linear(x, w), (rng.normal(size=(2, 3, 4)),
                                                          rng.normal(size=(4, 2)))),
])
def test_op_gradients(name, build, args):
    check(build, *args)


def test_gru_cell_gradients():
    h = 3
    check(lambda t, x, hh, wx, wh, bx, bh: t.gru_cell(x, hh, wx, wh, bx, bh),
          rng.normal(size=(2, 4)), rng.normal(size=(2, h)) * 0.5, rng.normal(size=(4, 3 * h)),
          rng.normal(size=(h, 3 * h)), rng.normal(size=3 * h), rng.normal(size=3 * h))


def test_gru_cell_matches_reference_equations():
    x, hh = rng.normal(size=(2, 4)), rng.normal(size=(2, 3))
    wx, wh = rng.normal(size=(4, 9)), rng.normal(size=(3, 9))
    bx, bh = rng.normal(size=9), rng.normal(size=9)
    t = Tape(record=False)
    out = t.gru_cell(t.const(x), t.const(hh), t.const(wx), t.const(wh), t.const(bx),
                     t.const(bh)).value

    def sig(v):
        return 1 / (1 + np.exp(-v))
    gx, gh = x @ wx + bx, hh @ wh + bh
    r = sig(gx[:, :3] + gh[:, :3])
    z = sig(gx[:, 3:6] + gh[:, 3:6])
    n = np.tanh(gx[:, 6:] + r * gh[:, 6:])
    assert np.allclose(out, (1 - z) * n + z * hh, atol=1e-14)


def test_shared_parent_accumulates():
    check(lambda t, a: t.mul(a, t.add(a, t.exp(a))), A)


def test_backward_contract():
    t = Tape(record=False)
    with pytest.raises(RuntimeError):
        t.backward(t.const(1.0))
    t = Tape()
    v = t.param("v", np.ones(3))
    with pytest.raises(ValueError):
        t.backward(t.scale(v, 2.0))
    # constants never receive gradients
    c = t.const(np.ones(3))
    t.backward(t.sum(t.mul(v, c)))
    assert c.grad is None and np.array_equal(t.grads()["v"], np.ones(3))


def test_no_record_tape_keeps_no_graph():
    t = Tape(record=False)
    x = t.const(A)
    t.relu(t.linear(x, t.const(np.eye(4))))
    assert t.nodes == []


def test_sigmoid_does_not_overflow():
    t = Tape(record=False)
    y = t.sigmoid(t.const(np.array([-1e4, 0.0, 1e4]))).value
    assert np.array_equal(y, [0.0, 0.5, 1.0])
