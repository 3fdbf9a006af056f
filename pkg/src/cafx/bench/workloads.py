"""Benchmark workloads. Each returns its checksum; timing lives in the harness."""
from __future__ import annotations

import numpy as np

from ..atom import atom
from ..behavior import Behavior, on
from ..message import ADDR, BOOL, I32
from ..runtime import ActorSystem
from . import kernels

DEFAULT_FACTOR_TARGET = 100000007 * 329545133  # both factors verified prime by sieve

_ON_I32 = on(I32)
_NEXT = atom("next")
_HOPS = atom("hops")
_FACTORS = atom("factors")
_ROW = atom("row")


def _system(workers, max_msgs):
    return ActorSystem(workers=workers, max_msgs=max_msgs)


# -- creation ----------------------------------------------------------------
def _creator(self, level, parent):
    if level == 0:
        self.send(parent, 1)
        self.quit()
        return None
    self.spawn(_creator, level - 1, self.addr)
    self.spawn(_creator, level - 1, self.addr)
    acc = [0, 0]

    def collect(v):
        acc[0] += v
        acc[1] += 1
        if acc[1] == 2:
            self.send(parent, acc[0])
            self.quit()
    return Behavior(_ON_I32 >> collect)


def run_creation(k: int, workers=None, max_msgs=None, timeout: float = 600.0) -> int:
    """Compute 2**k by a binary tree of actors; returns the root's sum."""
    if not 0 <= k <= 24:
        raise ValueError("k must be in [0, 24]")
    with _system(workers, max_msgs) as system, system.scoped() as me:
        system.spawn(_creator, k, me.addr)
        return me.receive(timeout).get(0)


# -- mailbox -----------------------------------------------------------------
def _receiver(self, total, reply_to):
    count = [0]

    def tick(_):
        count[0] += 1
        if count[0] == total:
            self.send(reply_to, count[0])
            self.quit()
    return Behavior(_ON_I32 >> tick)


def _sender(self, target, n):
    send = self.send
    for i in range(n):
        send(target, i & 0xFFFF)
    self.quit()


def run_mailbox(senders: int, msgs: int, workers=None, max_msgs=None,
                timeout: float = 600.0) -> int:
    """``senders`` actors each send ``msgs`` messages to one counting receiver."""
    if senders < 1 or msgs < 1:
        raise ValueError("senders and msgs must be at least 1")
    with _system(workers, max_msgs) as system, system.scoped() as me:
        rx = system.spawn(_receiver, senders * msgs, me.addr)
        for _ in range(senders):
            system.spawn(_sender, rx.addr, msgs)
        return me.receive(timeout).get(0)


# -- mixed -------------------------------------------------------------------
def _ring_member(self, first: bool, per_round: bool, master):
    nxt = [None]
    hops = [0]

    def set_next(_, addr):
        nxt[0] = addr

    def finish():
        self.send(master, _HOPS, hops[0])
        self.quit()

    def token(v):
        if v == 0:
            self.send(nxt[0], 0)
            finish()
            return
        if per_round:
            out = v - 1 if first and self.sender != master else v
        else:
            out = v - 1
        if out == 0:
            if not per_round:
                hops[0] += 1
            self.send(nxt[0], 0)
            finish()
            return
        hops[0] += 1
        self.send(nxt[0], out)
    return Behavior(on(_NEXT, ADDR) >> set_next, _ON_I32 >> token)


def _factorizer(self, target, master):
    factors = kernels.factorize(target)
    product = 1
    for f in factors:
        product *= f
    ok = product == target and all(a <= b for a, b in zip(factors, factors[1:]))
    self.send(master, _FACTORS, ok)
    self.quit()


def _ring_master(self, size, token, reps, target, per_round, reply_to):
    state = {"rep": 0, "reports": 0, "hops": 0, "verified": True}

    def start():
        members = [self.spawn(_ring_member, i == 0, per_round, self.addr) for i in range(size)]
        for i, m in enumerate(members):
            self.send(m, _NEXT, members[(i + 1) % size].addr)
        self.spawn(_factorizer, target, self.addr)
        self.send(members[0], token)
        state["reports"] = 0

    def on_hops(_, n):
        state["hops"] += n
        done()

    def on_factors(_, ok):
        state["verified"] = state["verified"] and ok
        done()

    def done():
        state["reports"] += 1
        if state["reports"] < size + 1:
            return
        state["rep"] += 1
        if state["rep"] < reps:
            start()
        else:
            self.send(reply_to, state["hops"], state["verified"])
            self.quit()

    start()
    return Behavior(on(_HOPS, I32) >> on_hops, on(_FACTORS, BOOL) >> on_factors)


def mixed_checksum(hops: int, verified: bool, target: int) -> int:
    return (hops ^ (target if verified else 0)) & 0xFFFFFFFFFFFFFFFF


def run_mixed(rings: int, ring_size: int, token: int, reps: int,
              target: int = DEFAULT_FACTOR_TARGET, decrement: str = "round",
              workers=None, max_msgs=None, timeout: float = 600.0) -> tuple[int, int, bool]:
    """Token rings plus one factorization per ring incarnation.

    Returns ``(checksum, total hops, all factorizations verified)``. With
    ``decrement="round"`` the token drops by one per full round, giving
    ``token * ring_size`` hops per ring; with ``"hop"`` it drops on every
    forward, giving ``token`` hops.
    """
    if min(rings, ring_size, token, reps) < 1 or target < 2:
        raise ValueError("all parameters must be >= 1 and target >= 2")
    if decrement not in ("round", "hop"):
        raise ValueError("decrement must be 'round' or 'hop'")
    per_round = decrement == "round"
    with _system(workers, max_msgs) as system, system.scoped() as me:
        for _ in range(rings):
            system.spawn(_ring_master, ring_size, token, reps, target, per_round, me.addr)
        hops, verified = 0, True
        for _ in range(rings):
            msg = me.receive(timeout)
            hops += msg.get(0)
            verified = verified and msg.get(1)
        return mixed_checksum(hops, verified, target), hops, verified


# -- mandelbrot ----------------------------------------------------------------
def _row_worker(self, y, n, max_iter, area, collector):
    self.send(collector, _ROW, y, kernels.mandelbrot_row(y, n, max_iter, area).tobytes())
    self.quit()


def run_mandelbrot(n: int, max_iter: int, area=kernels.DEFAULT_AREA, workers=None,
                   max_msgs=None, timeout: float = 600.0) -> int:
    """One actor per row; the caller collects rows and hashes them in row order."""
    if n < 1 or max_iter < 1:
        raise ValueError("size and max_iter must be at least 1")
    counts = np.empty((n, n), dtype=np.uint32)
    with _system(workers, max_msgs) as system, system.scoped() as me:
        for y in range(n):
            system.spawn(_row_worker, y, n, max_iter, area, me.addr)
        for _ in range(n):
            msg = me.receive(timeout)
            counts[msg.get(1)] = np.frombuffer(msg.get(2), dtype=np.uint32)
    return kernels.counts_checksum(counts)


__all__ = ["run_creation", "run_mailbox", "run_mixed", "run_mandelbrot", "mixed_checksum",
           "DEFAULT_FACTOR_TARGET"]
