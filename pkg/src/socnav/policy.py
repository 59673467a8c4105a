"""Recurrent actor-critic with auxiliary count/position/trajectory heads and a risk head.

Observation encoding: ray depths pass through two ReLU layers, the goal
``(rho, theta, sin theta, cos theta)`` through a linear map; the two are
concatenated and fed to a two-layer GRU whose top output ``delta`` feeds
every head.
"""

from __future__ import annotations

import io
import json
import math
import struct
from dataclasses import asdict, dataclass

import numpy as np

from .autodiff import Tape, Var
from .errors import ContractError
from .scene import M_MAX

FORWARD, TURN_LEFT, TURN_RIGHT, STOP = 0, 1, 2, 3
ACTIONS = ("FORWARD", "TURN_LEFT", "TURN_RIGHT", "STOP")
N_ACTIONS = 4

CHECKPOINT_MAGIC = b"SNCK"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class NetConfig:
    rays: int = 64
    hidden: int = 64  # recurrent width h
    enc1: int = 128
    enc2: int = 64
    goal_dim: int = 32
    risk_hidden: int = 32
    m_max: int = M_MAX
    horizon: int = 8
    layers: int = 2
    d_max: float = 5.0


@dataclass(frozen=True)
class LossWeights:
    beta_main: float = 1.0
    beta_aux: float = 0.3
    beta_risk: float = 0.1
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    clip: float = 0.2

    def __post_init__(self):
        if min(self.beta_main, self.beta_aux, self.beta_risk) < 0:
            raise ValueError("loss weights must be non-negative")


def param_shapes(cfg: NetConfig) -> dict:
    h, M, H = cfg.hidden, cfg.m_max, cfg.horizon
    shapes = {
        "enc1.w": (cfg.rays, cfg.enc1), "enc1.b": (cfg.enc1,),
        "enc2.w": (cfg.enc1, cfg.enc2), "enc2.b": (cfg.enc2,),
        "goal.w": (4, cfg.goal_dim), "goal.b": (cfg.goal_dim,),
    }
    n_in = cfg.enc2 + cfg.goal_dim
    for layer in range(cfg.layers):
        shapes[f"gru{layer}.wx"] = (n_in, 3 * h)
        shapes[f"gru{layer}.wh"] = (h, 3 * h)
        shapes[f"gru{layer}.bx"] = (3 * h,)
        shapes[f"gru{layer}.bh"] = (3 * h,)
        n_in = h
    shapes.update({
        "actor.w": (h, N_ACTIONS), "actor.b": (N_ACTIONS,),
        "critic.w": (h, 1), "critic.b": (1,),
        "count.w": (h, M + 1), "count.b": (M + 1,),
        "pos.w": (h, 2 * M), "pos.b": (2 * M,),
        "traj.w": (h, 2 * M * H), "traj.b": (2 * M * H,),
        "risk.w1": (h, cfg.risk_hidden), "risk.w2": (cfg.risk_hidden, M),
    })
    return shapes


def _orthogonal(rng, shape, gain):
    rows, cols = shape
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


_GAINS = {"actor.w": 0.01, "critic.w": 1.0}


def init_params(cfg: NetConfig, seed: int = 0) -> dict:
    """Orthogonal weights (gain sqrt(2) for hidden layers, small for the actor), zero biases."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(cfg).items():
        if len(shape) == 1:
            params[name] = np.zeros(shape)
        elif name.startswith("gru"):
            # orthogonal per gate block
            h3 = shape[1] // 3
            params[name] = np.concatenate(
                [_orthogonal(rng, (shape[0], h3), 1.0) for _ in range(3)], axis=1)
        else:
            params[name] = _orthogonal(rng, shape, _GAINS.get(name, math.sqrt(2.0)))
    return {k: np.ascontiguousarray(v) for k, v in params.items()}


def zero_state(cfg: NetConfig, batch: int) -> np.ndarray:
    return np.zeros((cfg.layers, batch, cfg.hidden))


def obs_arrays(observations):
    """Stack Observations into ``(B, R)`` depth and ``(B, 4)`` goal features."""
    depth = np.stack([np.asarray(o.depth, dtype=np.float64) for o in observations])
    goal = np.array([goal_features(o.goal) for o in observations])
    return depth, goal


def goal_features(goal) -> tuple:
    rho, theta = goal
    return (rho, theta, math.sin(theta), math.cos(theta))


@dataclass
class Outputs:
    logits: Var
    value: Var  # (B,)
    count: Var | None = None  # (B, M+1)
    positions: Var | None = None  # (B, M, 2)
    futures: Var | None = None  # (B, M, H, 2)
    risk: Var | None = None  # (B, M)
    state: list | None = None  # per-layer (B, h) Vars


def _check_shapes(cfg, depth, goal, state):
    if depth.ndim != 2 or depth.shape[1] != cfg.rays:
        raise ContractError(f"depth must be (B, {cfg.rays}), got {depth.shape}")
    if goal.shape != (depth.shape[0], 4):
        raise ContractError(f"goal features must be (B, 4), got {goal.shape}")
    if state.shape != (cfg.layers, depth.shape[0], cfg.hidden):
        raise ContractError(f"recurrent state must be {(cfg.layers, depth.shape[0], cfg.hidden)},"
                            f" got {state.shape}")


def forward_tape(tape: Tape, params: dict, cfg: NetConfig, depth, goal, state,
                 aux: bool = True) -> Outputs:
    """One step for a batch.  ``state`` is a list of per-layer (B, h) Vars or an array."""
    P = lambda n: tape.param(n, params[n])  # noqa: E731
    if isinstance(state, np.ndarray):
        state = [tape.const(s) for s in state]
    x = tape.const(np.asarray(depth) / cfg.d_max)
    x = tape.relu(tape.linear(x, P("enc1.w"), P("enc1.b")))
    x = tape.relu(tape.linear(x, P("enc2.w"), P("enc2.b")))
    g = tape.linear(tape.const(goal), P("goal.w"), P("goal.b"))
    x = tape.concat([x, g])
    new_state = []
    for layer in range(cfg.layers):
        x = tape.gru_cell(x, state[layer], P(f"gru{layer}.wx"), P(f"gru{layer}.wh"),
                          P(f"gru{layer}.bx"), P(f"gru{layer}.bh"))
        new_state.append(x)
    delta = x
    B = delta.value.shape[0]
    out = Outputs(logits=tape.linear(delta, P("actor.w"), P("actor.b")),
                  value=tape.reshape(tape.linear(delta, P("critic.w"), P("critic.b")), (B,)),
                  state=new_state)
    if aux:
        M, H = cfg.m_max, cfg.horizon
        out.count = tape.linear(delta, P("count.w"), P("count.b"))
        out.positions = tape.reshape(tape.linear(delta, P("pos.w"), P("pos.b")), (B, M, 2))
        out.futures = tape.reshape(tape.linear(delta, P("traj.w"), P("traj.b")), (B, M, H, 2))
        hidden = tape.relu(tape.linear(delta, P("risk.w1")))
        out.risk = tape.sigmoid(tape.linear(hidden, P("risk.w2")))
    return out


def forward(params: dict, cfg: NetConfig, depth, goal, state, aux: bool = True):
    """Evaluate without recording.  Returns ``(logits, value, aux, risk, new_state)`` arrays;
    ``aux`` is ``(count_logits, positions, futures)`` or None when ``aux`` is off."""
    depth = np.asarray(depth, dtype=np.float64)
    goal = np.asarray(goal, dtype=np.float64)
    state = np.asarray(state, dtype=np.float64)
    if depth.ndim == 1:
        depth, goal, state = depth[None], goal[None], state[:, None]
    _check_shapes(cfg, depth, goal, state)
    tape = Tape(record=False)
    o = forward_tape(tape, params, cfg, depth, goal, state, aux=aux)
    new_state = np.stack([s.value for s in o.state])
    if not aux:
        return o.logits.value, o.value.value, None, None, new_state
    return (o.logits.value, o.value.value,
            (o.count.value, o.positions.value, o.futures.value), o.risk.value, new_state)


def greedy_action(logits) -> np.ndarray:
    """Argmax with ties going to the lowest index (FORWARD < LEFT < RIGHT < STOP)."""
    return np.argmax(np.asarray(logits), axis=-1)


def act_greedy(params: dict, cfg: NetConfig, depth, goal, state, aux: bool = False):
    logits, _, _, _, new_state = forward(params, cfg, depth, goal, state, aux=aux)
    return greedy_action(logits), new_state


def sample_action(logits, rng: np.random.Generator) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    z = logits - logits.max(axis=-1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=-1, keepdims=True)
    u = rng.random(p.shape[0])
    a = (np.cumsum(p, axis=-1) < u[:, None]).sum(axis=-1)
    return np.minimum(a, N_ACTIONS - 1)


# ---------------------------------------------------------------------------
# losses


@dataclass
class Batch:
    """A recurrent minibatch laid out time-major: arrays are ``(T, B, ...)``."""
    depth: np.ndarray
    goal: np.ndarray
    starts: np.ndarray  # (T, B) 1 where an episode begins at this step
    init_state: np.ndarray  # (layers, B, h)
    actions: np.ndarray
    old_logp: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray
    count: np.ndarray  # (T, B) int
    positions: np.ndarray  # (T, B, M, 2)
    futures: np.ndarray  # (T, B, M, H, 2)
    mask: np.ndarray  # (T, B, M)
    risk: np.ndarray  # (T, B, M)


@dataclass
class LossParts:
    total: float
    main: float
    policy: float
    value: float
    entropy: float
    count: float
    pos: float
    traj: float
    risk: float


def unroll(tape: Tape, params, cfg: NetConfig, batch: Batch, aux: bool = True):
    T, B = batch.starts.shape
    state = [tape.const(s) for s in batch.init_state]
    outs = []
    for t in range(T):
        keep = (1.0 - batch.starts[t])[:, None]
        if keep.min() < 1.0:
            k = tape.const(keep)
            state = [tape.mul(s, k) for s in state]
        o = forward_tape(tape, params, cfg, batch.depth[t], batch.goal[t], state, aux=aux)
        state = o.state
        outs.append(o)
    return outs


def total_loss(tape: Tape, params, cfg: NetConfig, batch: Batch, w: LossWeights):
    """Returns ``(loss_var, LossParts)``; aux and risk heads are skipped when their weight is 0."""
    if batch.starts.size == 0:
        raise ContractError("empty rollout")
    use_aux = w.beta_aux > 0 or w.beta_risk > 0
    outs = unroll(tape, params, cfg, batch, aux=use_aux)
    T, B = batch.starts.shape
    n = float(T * B)
    logits = tape.stack([o.logits for o in outs])  # (T, B, A)
    values = tape.stack([o.value for o in outs])  # (T, B)
    logp_all = tape.log_softmax(logits)
    logp = tape.take(logp_all, batch.actions)
    ratio = tape.exp(tape.sub(logp, tape.const(batch.old_logp)))
    adv = tape.const(batch.advantages)
    surr = tape.minimum(tape.mul(ratio, adv),
                        tape.mul(tape.clip(ratio, 1.0 - w.clip, 1.0 + w.clip), adv))
    policy_loss = tape.scale(tape.mean(surr), -1.0)
    value_loss = tape.scale(tape.mean(tape.square(tape.sub(values, tape.const(batch.returns)))),
                            0.5)
    entropy = tape.scale(tape.sum(tape.mul(tape.exp(logp_all), logp_all)), -1.0 / n)
    main = tape.add(policy_loss, tape.sub(tape.scale(value_loss, w.value_coef),
                                          tape.scale(entropy, w.entropy_coef)))
    loss = tape.scale(main, w.beta_main)
    zero = 0.0
    l_count = l_pos = l_traj = l_risk = zero
    if w.beta_aux > 0:
        count = tape.stack([o.count for o in outs])
        lc = tape.scale(tape.sum(tape.take(tape.log_softmax(count), batch.count)), -1.0 / n)
        # per-step mean over valid slots, then mean over steps
        denom = np.maximum(batch.mask.sum(axis=-1), 1.0)  # (T, B)
        m = batch.mask.astype(np.float64)
        pos = tape.stack([o.positions for o in outs])
        pw = tape.const(m[..., None] / denom[..., None, None] / n)
        lp = tape.sum(tape.mul(tape.square(tape.sub(pos, tape.const(batch.positions))), pw))
        fut = tape.stack([o.futures for o in outs])
        fw = tape.const(m[..., None, None] / denom[..., None, None, None] / n)
        lt = tape.sum(tape.mul(tape.square(tape.sub(fut, tape.const(batch.futures))), fw))
        aux_sum = tape.add(lc, tape.add(lp, lt))
        loss = tape.add(loss, tape.scale(aux_sum, w.beta_aux))
        l_count, l_pos, l_traj = float(lc.value), float(lp.value), float(lt.value)
    if w.beta_risk > 0:
        risk = tape.stack([o.risk for o in outs])
        rw = 1.0 + batch.risk
        rw = rw / rw.sum(axis=-1, keepdims=True) / n
        lr = tape.sum(tape.mul(tape.square(tape.sub(risk, tape.const(batch.risk))),
                               tape.const(rw)))
        loss = tape.add(loss, tape.scale(lr, w.beta_risk))
        l_risk = float(lr.value)
    parts = LossParts(float(loss.value), float(main.value), float(policy_loss.value),
                      float(value_loss.value), float(entropy.value), l_count, l_pos, l_traj, l_risk)
    return loss, parts


# ---------------------------------------------------------------------------
# checkpoints: magic, header {version, h, R, M_max, H}, JSON manifest, raw <f8 blobs

_HEADER = struct.Struct("<4sIIIII")


def save_checkpoint(path, params: dict, cfg: NetConfig, extra: dict | None = None) -> None:
    names = sorted(params)
    manifest = {"config": asdict(cfg), "extra": extra or {}, "tensors": []}
    offset = 0
    for n in names:
        a = params[n]
        manifest["tensors"].append({"name": n, "shape": list(a.shape), "offset": offset})
        offset += a.size * 8
    blob = json.dumps(manifest, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, cfg.hidden, cfg.rays,
                             cfg.m_max, cfg.horizon))
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for n in names:
            f.write(np.ascontiguousarray(params[n], dtype="<f8").tobytes())


def load_checkpoint(path):
    """Returns ``(params, cfg, extra)``."""
    with open(path, "rb") as f:
        data = f.read()
    buf = io.BytesIO(data)
    magic, version, h, R, M, H = _HEADER.unpack(buf.read(_HEADER.size))
    if magic != CHECKPOINT_MAGIC:
        raise ContractError(f"{path} is not a checkpoint")
    if version != CHECKPOINT_VERSION:
        raise ContractError(f"unsupported checkpoint version {version}")
    (n,) = struct.unpack("<I", buf.read(4))
    manifest = json.loads(buf.read(n))
    cfg = NetConfig(**manifest["config"])
    if (cfg.hidden, cfg.rays, cfg.m_max, cfg.horizon) != (h, R, M, H):
        raise ContractError("checkpoint header disagrees with its manifest")
    base = _HEADER.size + 4 + n
    params = {}
    for t in manifest["tensors"]:
        count = int(np.prod(t["shape"])) if t["shape"] else 1
        start = base + t["offset"]
        params[t["name"]] = np.frombuffer(data, dtype="<f8", count=count,
                                          offset=start).reshape(t["shape"]).astype(np.float64)
    expected = param_shapes(cfg)
    for k, shape in expected.items():
        if k not in params or params[k].shape != tuple(shape):
            raise ContractError(f"checkpoint tensor {k} missing or misshapen")
    return params, cfg, manifest["extra"]
