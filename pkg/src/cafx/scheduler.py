"""Cooperative scheduler mapping actors onto a fixed pool of worker threads.

The coordinator owns the workers and delegates every queueing decision to a
policy object. A policy is any object providing the hook methods of
:class:`SchedulerPolicy`; it does not need to inherit from anything.

The default :class:`WorkStealingPolicy` gives each worker a double-ended
queue. Work created on a worker goes to the front of its own queue, work
arriving from outside goes to the back, and an idle worker steals from the
back of a randomly chosen victim.
"""
from __future__ import annotations

import itertools
import os
import random
import threading
import time
from collections import deque
from enum import IntEnum
from typing import Protocol

from .errors import ConfigurationError

UNLIMITED = 2**63 - 1


class ResumeResult(IntEnum):
    AWAITING = 1  # mailbox empty, job parked until the next enqueue
    YIELDED = 2   # budget exhausted, job must run again
    FINISHED = 3  # job is done


class SchedulerPolicy(Protocol):
    def init_coordinator(self, coord: "Coordinator") -> None: ...
    def init_worker(self, worker: "Worker") -> None: ...
    def central_enqueue(self, coord: "Coordinator", job) -> None: ...
    def external_enqueue(self, worker: "Worker", job) -> None: ...
    def internal_enqueue(self, worker: "Worker", job) -> None: ...
    def resume_job_later(self, worker: "Worker", job) -> None: ...
    def dequeue(self, worker: "Worker"): ...
    def before_resume(self, worker: "Worker", job) -> None: ...
    def after_resume(self, worker: "Worker", job) -> None: ...
    def after_completion(self, worker: "Worker", job) -> None: ...
    def wake_all(self, coord: "Coordinator") -> None: ...


_tls = threading.local()


def current_worker() -> "Worker | None":
    return getattr(_tls, "worker", None)


class Worker:
    __slots__ = ("index", "coord", "data", "thread", "rng")

    def __init__(self, index: int, coord: "Coordinator"):
        self.index = index
        self.coord = coord
        self.data = None
        self.thread: threading.Thread | None = None
        self.rng = random.Random(index * 7919 + 1)

    def run(self):
        _tls.worker = self
        policy = self.coord.policy
        max_msgs = self.coord.max_msgs
        dequeue, before, after = policy.dequeue, policy.before_resume, policy.after_resume
        AWAITING, YIELDED = ResumeResult.AWAITING, ResumeResult.YIELDED
        try:
            while True:
                job = dequeue(self)
                if job is None:
                    return
                before(self, job)
                res = job.resume(self, max_msgs)
                after(self, job)
                if res is AWAITING:
                    continue
                if res is YIELDED:
                    policy.resume_job_later(self, job)
                else:
                    policy.after_completion(self, job)
        finally:
            _tls.worker = None

    def __repr__(self):
        return f"Worker({self.index})"


def _env_int(name: str) -> int | None:
    raw = os.environ.get(name)
    if raw is None or raw.strip() == "":
        return None
    try:
        return int(raw, 10)
    except ValueError:
        raise ConfigurationError(f"{name} must be a decimal integer, got {raw!r}") from None


def default_workers() -> int:
    return _env_int("CAFX_WORKERS") or os.cpu_count() or 1


def default_max_msgs() -> int:
    return _env_int("CAFX_MAX_MSGS") or UNLIMITED


class Coordinator:
    """Passive scheduler state bridging actor and non-actor code."""

    def __init__(self, policy=None, num_workers: int | None = None, max_msgs: int | None = None):
        self.policy = policy if policy is not None else WorkStealingPolicy()
        self.num_workers = num_workers if num_workers is not None else default_workers()
        self.max_msgs = max_msgs if max_msgs is not None else default_max_msgs()
        if self.num_workers < 1:
            raise ConfigurationError("num_workers must be at least 1")
        if self.max_msgs < 1:
            raise ConfigurationError("max_msgs must be at least 1")
        self.stopping = False
        self.started = False
        self.workers = [Worker(i, self) for i in range(self.num_workers)]
        self.policy.init_coordinator(self)
        for w in self.workers:
            self.policy.init_worker(w)

    def start(self):
        if self.started:
            return
        self.started = True
        for w in self.workers:
            w.thread = threading.Thread(target=w.run, name=f"cafx-worker-{w.index}", daemon=True)
            w.thread.start()

    def stop(self, timeout: float | None = 5.0):
        self.stopping = True
        self.policy.wake_all(self)
        for w in self.workers:
            if w.thread is not None and w.thread is not threading.current_thread():
                w.thread.join(timeout)

    def schedule(self, job):
        """Make ``job`` ready: front of the current worker's queue, or central enqueue."""
        w = getattr(_tls, "worker", None)
        if w is not None and w.coord is self:
            self.policy.internal_enqueue(w, job)
        else:
            self.policy.central_enqueue(self, job)


class _StealingData:
    __slots__ = ("queue", "wakeup", "steals", "before", "after", "completed")

    def __init__(self):
        self.queue: deque = deque()
        self.wakeup = threading.Event()
        self.steals = 0
        self.before = 0
        self.after = 0
        self.completed = 0


class WorkStealingPolicy:
    """Randomized work stealing over per-worker deques.

    ``collections.deque`` appends and pops at either end are atomic in
    CPython, which makes the owner-front / thief-back discipline
    linearizable without further locking.

    Idle workers back off in three phases: ``spin`` immediate retries,
    ``yields`` retries that give up the time slice, then retries that sleep
    up to ``sleep_s`` (woken early by an external enqueue).
    """

    def __init__(self, spin: int = 100, yields: int = 100, sleep_s: float = 0.001):
        self.spin = spin
        self.yields = yields
        self.sleep_s = sleep_s
        self._rr = itertools.count()

    # -- setup -----------------------------------------------------------
    def init_coordinator(self, coord):
        self.coord = coord

    def init_worker(self, worker):
        worker.data = _StealingData()

    # -- enqueue hooks ---------------------------------------------------
    def central_enqueue(self, coord, job):
        w = coord.workers[next(self._rr) % len(coord.workers)]
        self.external_enqueue(w, job)

    def external_enqueue(self, worker, job):
        d = worker.data
        d.queue.append(job)
        d.wakeup.set()

    def internal_enqueue(self, worker, job):
        worker.data.queue.appendleft(job)

    def resume_job_later(self, worker, job):
        self.external_enqueue(worker, job)

    # -- dequeue ---------------------------------------------------------
    def dequeue(self, worker):
        d = worker.data
        q = d.queue
        if q:
            try:
                return q.popleft()
            except IndexError:
                pass
        coord = worker.coord
        others = [w.data.queue for w in coord.workers if w is not worker]
        rng = worker.rng
        attempts = 0
        spin, yields = self.spin, self.spin + self.yields
        while not coord.stopping:
            if others:
                victim = others[rng.randrange(len(others))]
                if victim:
                    try:
                        job = victim.pop()
                        d.steals += 1
                        return job
                    except IndexError:
                        pass
            if q:
                try:
                    return q.popleft()
                except IndexError:
                    pass
            attempts += 1
            if attempts <= spin:
                continue
            if attempts <= yields:
                time.sleep(0)
                continue
            d.wakeup.wait(self.sleep_s)
            d.wakeup.clear()
        return None

    # -- resume bracketing -------------------------------------------------
    def before_resume(self, worker, job):
        worker.data.before += 1

    def after_resume(self, worker, job):
        worker.data.after += 1

    def after_completion(self, worker, job):
        worker.data.completed += 1

    def wake_all(self, coord):
        for w in coord.workers:
            w.data.wakeup.set()

    # -- instrumentation -------------------------------------------------
    def stats(self, coord=None) -> dict:
        coord = coord or self.coord
        ds = [w.data for w in coord.workers]
        return {
            "steals": sum(d.steals for d in ds),
            "before_resume": sum(d.before for d in ds),
            "after_resume": sum(d.after for d in ds),
            "after_completion": sum(d.completed for d in ds),
            "queued": [len(d.queue) for d in ds],
        }
