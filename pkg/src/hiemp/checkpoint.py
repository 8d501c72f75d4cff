"""Single-file binary checkpoints.

Layout: magic b"HIEMP1", u16 version, u8 kind (1 = skill agent, 2 = agent
with an attached task level), then the environment, every level's nets and
spec, and the start-state buffers. All integers and floats are little
endian; parameter arrays are flat float64. Optimizer accumulators are not
stored; loading starts them fresh.
"""

from __future__ import annotations

import struct
from collections import deque
from pathlib import Path

import numpy as np

from .env import BoxRegion, EnvModel, Wall
from .gc_actor_critic import GCActorCritic
from .gs_actor_critic import GSActorCritic
from .hierarchy import Agent, Level, LevelSpec
from .nnet import Net, init_opt
from .phase2 import ExtendedAgent, TaskSpec

MAGIC = b"HIEMP1"
VERSION = 1


class _Writer:
    def __init__(self):
        self.chunks: list[bytes] = []

    def u8(self, v): self.chunks.append(struct.pack("<B", v))
    def u16(self, v): self.chunks.append(struct.pack("<H", v))
    def u32(self, v): self.chunks.append(struct.pack("<I", v))
    def f64(self, v): self.chunks.append(struct.pack("<d", float(v)))

    def arr(self, a):
        a = np.ascontiguousarray(a, dtype="<f8")
        self.u32(a.size)
        self.chunks.append(a.tobytes())

    def text(self, s: str):
        b = s.encode("utf-8")
        self.u32(len(b))
        self.chunks.append(b)

    def getvalue(self) -> bytes:
        return b"".join(self.chunks)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.off = 0

    def _take(self, n: int) -> bytes:
        if self.off + n > len(self.data):
            raise ValueError("truncated checkpoint")
        out = self.data[self.off:self.off + n]
        self.off += n
        return out

    def u8(self): return struct.unpack("<B", self._take(1))[0]
    def u16(self): return struct.unpack("<H", self._take(2))[0]
    def u32(self): return struct.unpack("<I", self._take(4))[0]
    def f64(self): return struct.unpack("<d", self._take(8))[0]

    def arr(self):
        n = self.u32()
        return np.frombuffer(self._take(8 * n), dtype="<f8").astype(np.float64)

    def text(self) -> str:
        n = self.u32()
        return self._take(n).decode("utf-8")


def _write_net(w: _Writer, net: Net):
    w.u32(len(net.layer_dims))
    for d in net.layer_dims:
        w.u32(d)
    for wt, b in zip(net.weights, net.biases):
        w.arr(wt.ravel())
        w.arr(b)


def _read_net(r: _Reader) -> Net:
    nd = r.u32()
    dims = tuple(r.u32() for _ in range(nd))
    weights, biases = [], []
    for i in range(nd - 1):
        wt = r.arr().reshape(dims[i], dims[i + 1])
        b = r.arr()
        wt.flags.writeable = False
        b.flags.writeable = False
        weights.append(wt)
        biases.append(b)
    return Net(dims, tuple(weights), tuple(biases))


def _write_env(w: _Writer, env: EnvModel):
    w.text(env.name)
    w.u32(env.state_dim)
    w.u32(env.action_dim)
    w.u32(len(env.goal_dims))
    for g in env.goal_dims:
        w.u32(g)
    w.f64(env.v_max)
    w.arr(env.noise_std)
    w.u32(len(env.walls))
    for wall in env.walls:
        w.u8(wall.axis)
        w.f64(wall.offset)
        w.f64(wall.lo)
        w.f64(wall.hi)
    w.u8(1 if env.cage is not None else 0)
    if env.cage is not None:
        w.arr(env.cage.lo)
        w.arr(env.cage.hi)
    w.arr(env.start_region.lo)
    w.arr(env.start_region.hi)


def _read_env(r: _Reader) -> EnvModel:
    name = r.text()
    state_dim = r.u32()
    action_dim = r.u32()
    goal_dims = tuple(r.u32() for _ in range(r.u32()))
    v_max = r.f64()
    noise_std = r.arr()
    walls = tuple(Wall(r.u8(), r.f64(), r.f64(), r.f64()) for _ in range(r.u32()))
    cage = None
    if r.u8():
        cage = BoxRegion(r.arr(), r.arr())
    start = BoxRegion(r.arr(), r.arr())
    return EnvModel(name, state_dim, action_dim, goal_dims, v_max, noise_std,
                    walls, cage, start)


def _write_agent_body(w: _Writer, agent: Agent):
    _write_env(w, agent.env)
    w.u32(agent.k)
    for lev in agent.levels:
        w.u32(lev.spec.n)
        w.f64(lev.spec.sigma0_gc)
        w.f64(lev.spec.sigma0_gs)
        w.f64(lev.spec.eps_threshold)
        w.f64(lev.spec.gamma)
        _write_net(w, lev.gc.policy)
        _write_net(w, lev.gc.critic)
        _write_net(w, lev.gs.policy)
        _write_net(w, lev.gs.critic)
    for buf in agent.start_buffers:
        w.u32(buf.maxlen)
        w.u32(len(buf))
        for s in buf:
            w.arr(s)


def _read_agent_body(r: _Reader) -> Agent:
    env = _read_env(r)
    k = r.u32()
    levels = []
    for _ in range(k):
        spec = LevelSpec(r.u32(), r.f64(), r.f64(), r.f64(), r.f64())
        pol = _read_net(r)
        cri = _read_net(r)
        gspol = _read_net(r)
        gscri = _read_net(r)
        levels.append(Level(
            GCActorCritic(pol, cri, init_opt(pol), init_opt(cri)),
            GSActorCritic(gspol, gscri, init_opt(gspol), init_opt(gscri)),
            spec))
    buffers = []
    for _ in range(k):
        cap = r.u32()
        count = r.u32()
        buf = deque(maxlen=cap)
        for _ in range(count):
            buf.append(r.arr())
        buffers.append(buf)
    return Agent(env, levels, buffers)


def _header(kind: int) -> _Writer:
    w = _Writer()
    w.chunks.append(MAGIC)
    w.u16(VERSION)
    w.u8(kind)
    return w


def save_agent(path, agent: Agent) -> None:
    w = _header(1)
    _write_agent_body(w, agent)
    Path(path).write_bytes(w.getvalue())


def save_extended(path, ext: ExtendedAgent) -> None:
    w = _header(2)
    _write_agent_body(w, ext.base)
    w.arr(ext.task.goal_lengths)
    w.u32(ext.task.n_task)
    w.f64(ext.task.eps_task)
    _write_net(w, ext.task_ac.policy)
    _write_net(w, ext.task_ac.critic)
    Path(path).write_bytes(w.getvalue())


def _open(path) -> tuple[_Reader, int]:
    data = Path(path).read_bytes()
    if data[:len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: not a hiemp checkpoint (bad magic)")
    r = _Reader(data)
    r.off = len(MAGIC)
    version = r.u16()
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version} "
                         f"(expected {VERSION})")
    return r, r.u8()


def load_agent(path) -> Agent:
    r, kind = _open(path)
    if kind != 1:
        raise ValueError(f"{path}: expected a skill-agent checkpoint, got kind {kind}")
    return _read_agent_body(r)


def load_extended(path) -> ExtendedAgent:
    r, kind = _open(path)
    if kind != 2:
        raise ValueError(f"{path}: expected a task-agent checkpoint, got kind {kind}")
    agent = _read_agent_body(r)
    lengths = r.arr()
    n_task = r.u32()
    eps_task = r.f64()
    pol = _read_net(r)
    cri = _read_net(r)
    task = TaskSpec(lengths, n_task, eps_task)
    return ExtendedAgent(agent, GCActorCritic(pol, cri, init_opt(pol), init_opt(cri)),
                         task)
