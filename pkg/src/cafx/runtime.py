"""Actor lifecycle and messaging: spawn, send, requests, behavior changes, links, monitors.

An actor is a function ``fn(self, *args)`` that returns its initial behavior::

    def counter(self, start):
        n = [start]

        def add(i: I32) -> I32:
            n[0] += i
            return n[0]

        return Behavior(add)

    with ActorSystem(workers=2) as system:
        c = system.spawn(counter, 10)
        with system.scoped() as me:
            assert me.request(c, 5).get(0) == 15

Every callback of one actor runs on at most one thread at a time. Messages
to terminated actors are dropped; requests to them are answered with a
``down`` error. Responses travel with the request id plus the high bit.
"""
from __future__ import annotations

import itertools
import logging
import threading
import time
from collections import deque
from enum import IntEnum

from .addr import ActorAddr, new_node_id
from .behavior import NO_MATCH, Behavior, MatchCase, derive_interface
from .errors import ConfigurationError, InterfaceMismatch
from .interface import ActorHandle, MessagingInterface, TypedHandle
from .mailbox import CachedStackMailbox, EnqueueResult
from .message import Message, default_registry, make_message, message_from
from .scheduler import Coordinator, ResumeResult, UNLIMITED
from .sysmsg import (DOWN_MSG, ERROR_MSG, EXIT_MSG, NORMAL, UNHANDLED_ERROR, UNKNOWN_ACTOR,
                     UNREACHABLE,
                     DownMsg, ErrorKind, ErrorMsg, ExitMsg, ExitReason, link_propagated)
from .timers import TimerService

log = logging.getLogger("cafx")

RESPONSE_BIT = 1 << 63
_MID_MASK = RESPONSE_BIT - 1

_UNBLOCKED = EnqueueResult.UNBLOCKED_READER
_REJECTED = EnqueueResult.REJECTED_CLOSED
_AWAITING, _YIELDED, _FINISHED = ResumeResult.AWAITING, ResumeResult.YIELDED, ResumeResult.FINISHED
_EMPTY = ()


class ActorState(IntEnum):
    WAITING = 0
    READY = 1
    RUNNING = 2
    DONE = 3


_WAITING, _READY, _RUNNING, _DONE = ActorState


class Envelope:
    """Mailbox node: content plus routing data. ``mid`` 0 means asynchronous."""

    __slots__ = ("next", "content", "sender", "mid")

    def __init__(self, content: Message, sender: ActorAddr | None, mid: int = 0):
        self.next = None
        self.content = content
        self.sender = sender
        self.mid = mid

    @property
    def is_request(self) -> bool:
        return self.mid != 0 and not self.mid & RESPONSE_BIT

    @property
    def is_response(self) -> bool:
        return bool(self.mid & RESPONSE_BIT)

    def __repr__(self):
        return f"Envelope({self.content!r}, from={self.sender!r}, mid={self.mid:#x})"


# Links and monitors of any actor are guarded by one of these; termination
# takes the same lock, so an attach either lands before the final snapshot
# or observes the recorded exit reason.
_STRIPES = [threading.Lock() for _ in range(64)]


def _stripe(actor) -> threading.Lock:
    return _STRIPES[actor.addr.id & 63]


def _msg(values: tuple) -> Message:
    if len(values) == 1 and type(values[0]) is Message:
        return values[0].clone()
    return make_message(*values)


class AbstractActor:
    """Anything addressable: local actors, scoped actors, remote proxies."""

    __slots__ = ("system", "addr", "_links", "_monitors", "_exit_reason", "__weakref__")

    def __init__(self, system: "ActorSystem", addr: ActorAddr):
        self.system = system
        self.addr = addr
        addr._ref = self
        self._links = None
        self._monitors = None
        self._exit_reason: ExitReason | None = None

    def _enqueue(self, env: Envelope) -> None:
        raise NotImplementedError

    @property
    def exit_reason(self) -> ExitReason | None:
        return self._exit_reason

    @property
    def done(self) -> bool:
        return self._exit_reason is not None

    # -- attach / detach ---------------------------------------------------
    def _attach_link(self, peer: "AbstractActor") -> bool:
        with _stripe(self):
            if self._exit_reason is not None:
                return False
            if self._links is None:
                self._links = set()
            self._links.add(peer)
            return True

    def _detach_link(self, peer: "AbstractActor") -> None:
        with _stripe(self):
            if self._links:
                self._links.discard(peer)

    def _attach_monitor(self, observer: "AbstractActor") -> bool:
        with _stripe(self):
            if self._exit_reason is not None:
                return False
            if self._monitors is None:
                self._monitors = []
            self._monitors.append(observer)
            return True

    def _detach_monitor(self, observer: "AbstractActor") -> None:
        with _stripe(self):
            if self._monitors and observer in self._monitors:
                self._monitors.remove(observer)

    def _seal(self, reason: ExitReason):
        """Record the exit reason and take the attachment lists, exactly once."""
        with _stripe(self):
            if self._exit_reason is not None:
                return None
            self._exit_reason = reason
            links, monitors = self._links, self._monitors
            self._links = self._monitors = None
        return links or _EMPTY, monitors or _EMPTY

    def _notify(self, links, monitors, reason: ExitReason) -> None:
        addr = self.addr
        if monitors:
            down = DownMsg(addr, reason)
            for m in monitors:
                m._enqueue(Envelope(make_message(down), addr))
        if links:
            sig = ExitMsg(addr, reason)
            for peer in links:
                peer._detach_link(self)
                peer._enqueue(Envelope(make_message(sig), addr))

    def _bounce(self, env: Envelope, reason: ExitReason | None = None) -> None:
        """Answer a request that can no longer be delivered with a down error."""
        if env.mid and not env.mid & RESPONSE_BIT and env.sender is not None:
            reason = reason or self._exit_reason or UNKNOWN_ACTOR
            sender = self.system._resolve(env.sender)
            sender._enqueue(Envelope(make_message(ErrorMsg(ErrorKind.DOWN, reason)),
                                     self.addr, env.mid | RESPONSE_BIT))

    def __repr__(self):
        return f"<{type(self).__name__} {self.addr.id}>"


class _DeadActor(AbstractActor):
    """Stand-in for an address with no live actor behind it."""

    __slots__ = ()

    def __init__(self, system, addr, reason=UNKNOWN_ACTOR):
        self.system = system
        self.addr = addr
        self._links = self._monitors = None
        self._exit_reason = reason

    def _enqueue(self, env):
        self._bounce(env)


class Pending:
    """An outstanding request. Install handlers with :meth:`then`."""

    __slots__ = ("mid", "target", "handler", "error_handler", "timer")

    def __init__(self, mid: int, target: ActorAddr):
        self.mid = mid
        self.target = target
        self.handler = None
        self.error_handler = None
        self.timer = None

    def then(self, handler=None, error_handler=None) -> "Pending":
        """``handler(*response_values)``; ``error_handler(ErrorMsg)``.

        Without an error handler an error response terminates the requester.
        """
        self.handler = handler
        self.error_handler = error_handler
        return self

    def __repr__(self):
        return f"Pending(mid={self.mid:#x}, target={self.target!r})"


class ResponsePromise:
    """Deferred answer to the request being handled when it was created."""

    __slots__ = ("_actor", "_sender", "_mid", "_delivered")

    def __init__(self, actor, sender, mid):
        self._actor = actor
        self._sender = sender
        self._mid = mid
        self._delivered = False

    @property
    def pending(self) -> bool:
        return not self._delivered

    def deliver(self, *values) -> None:
        if self._delivered:
            raise RuntimeError("response already delivered")
        self._delivered = True
        if self._sender is None:
            return
        msg = _msg(values)
        ref = self._actor.system._resolve(self._sender)
        mid = self._mid | RESPONSE_BIT if self._mid else 0
        ref._enqueue(Envelope(msg, self._actor.addr, mid))


def _as_behavior(b) -> Behavior | None:
    if b is None or isinstance(b, Behavior):
        return b
    if isinstance(b, (MatchCase,)) or callable(b):
        return Behavior(b)
    if isinstance(b, (tuple, list)):
        return Behavior(*b)
    raise TypeError(f"{b!r} is not a behavior")


def _is_single(content: Message, tid) -> bool:
    t = content._p.types
    return len(t) == 1 and t[0] is tid


class LocalActor(AbstractActor):
    """Event-based actor: runs on the scheduler, never blocks a thread."""

    counted = True  # included in the system's live-actor count

    __slots__ = ("mailbox", "behavior", "state", "trap_exit", "name", "error",
                 "_factory", "_args", "_iface", "_pending", "_early", "_retained",
                 "_replay", "_current", "_promised", "_next_mid", "_quit_reason", "_running")

    def __init__(self, system, addr, factory=None, args=_EMPTY, iface=None, name=None):
        self.system = system
        self.addr = addr
        addr._ref = self
        self._links = None
        self._monitors = None
        self._exit_reason = None
        self.mailbox = CachedStackMailbox()
        self.behavior: Behavior | None = None
        self.state = _READY
        self.trap_exit = False
        self.name = name
        self.error: BaseException | None = None
        self._factory = factory
        self._args = args
        self._iface = iface
        self._pending: deque | None = None
        self._early: dict | None = None
        self._retained: deque | None = None
        self._replay: deque | None = None
        self._current: Envelope | None = None
        self._promised = False
        self._next_mid = 0
        self._quit_reason: ExitReason | None = None
        self._running = False

    # -- enqueue side (any thread) -----------------------------------------
    def _enqueue(self, env: Envelope) -> None:
        r = self.mailbox.enqueue(env)
        if r is _UNBLOCKED:
            self.state = _READY
            self._wake()
        elif r is _REJECTED:
            self._bounce(env)

    def _wake(self) -> None:
        self.system._coord.schedule(self)

    # -- API for callbacks -----------------------------------------------
    @property
    def sender(self) -> ActorAddr | None:
        env = self._current
        return env.sender if env is not None else None

    @property
    def current_message(self) -> Message | None:
        env = self._current
        return env.content if env is not None else None

    @property
    def interface(self) -> MessagingInterface | None:
        return self._iface

    def handle(self) -> ActorHandle | TypedHandle:
        if self._iface is not None:
            return TypedHandle(self.addr, self._iface)
        return ActorHandle(self.addr)

    def send(self, target, *values) -> None:
        if len(values) == 1 and type(values[0]) is Message:
            msg = values[0].clone()
        else:
            msg = make_message(*values)
        if type(target) is ActorAddr and target._ref is not None:
            target._ref._enqueue(Envelope(msg, self.addr))
        else:
            self.system._ref_for(target, msg)._enqueue(Envelope(msg, self.addr))

    def sync_send(self, target, *values, timeout: float | None = None) -> Pending:
        """Send a request; until the answer arrives other messages are skipped."""
        msg = _msg(values)
        ref = self.system._ref_for(target, msg)
        self._next_mid += 1
        mid = self._next_mid
        p = Pending(mid, ref.addr)
        if self._pending is None:
            self._pending = deque()
        self._pending.append(p)
        if timeout is not None:
            timeout_env = Envelope(make_message(ErrorMsg(ErrorKind.TIMEOUT, detail=f"{timeout}s")),
                                   None, mid | RESPONSE_BIT)
            p.timer = self.system.timers.schedule(timeout, lambda: self._enqueue(timeout_env))
        ref._enqueue(Envelope(msg, self.addr, mid))
        return p

    request = sync_send

    def delayed_send(self, target, delay: float, *values) -> None:
        msg = _msg(values)
        ref = self.system._ref_for(target, msg)
        env = Envelope(msg, self.addr)
        self.system.timers.schedule(delay, lambda: ref._enqueue(env))

    def make_response_promise(self) -> ResponsePromise:
        """Take over answering the current message; suppresses the automatic reply."""
        env = self._current
        if env is None:
            raise RuntimeError("no message is being handled")
        self._promised = True
        return ResponsePromise(self, env.sender, env.mid)

    def become(self, *cases) -> None:
        b = _as_behavior(cases[0]) if len(cases) == 1 else Behavior(*cases)
        if self._iface is not None:
            got = derive_interface(b) if b is not None else None
            if got != self._iface:
                raise InterfaceMismatch(f"new behavior implements {got}, declared {self._iface}")
        self.behavior = b
        self._schedule_replay()

    def quit(self, reason: ExitReason = NORMAL) -> None:
        if self._quit_reason is None:
            self._quit_reason = reason

    def spawn(self, fn, *args, **kwargs):
        return self.system.spawn(fn, *args, **kwargs)

    def spawn_typed(self, iface, fn, *args, **kwargs):
        return self.system.spawn_typed(iface, fn, *args, **kwargs)

    def link(self, target) -> None:
        other = self.system._ref_for(target)
        if other is self:
            return
        if not other._attach_link(self):
            self._enqueue(Envelope(make_message(ExitMsg(other.addr, other._exit_reason)), other.addr))
            return
        if not self._attach_link(other):
            other._detach_link(self)

    def unlink(self, target) -> None:
        other = self.system._ref_for(target)
        other._detach_link(self)
        self._detach_link(other)

    def monitor(self, target) -> None:
        other = self.system._ref_for(target)
        if not other._attach_monitor(self):
            self._enqueue(Envelope(make_message(DownMsg(other.addr, other._exit_reason)), other.addr))

    def demonitor(self, target) -> None:
        self.system._ref_for(target)._detach_monitor(self)

    # -- execution (owner thread only) --------------------------------------
    def resume(self, worker, max_msgs: int) -> ResumeResult:
        if self._running:
            raise RuntimeError(f"{self!r} resumed concurrently")
        self._running = True
        self.state = _RUNNING
        try:
            if self._factory is not None:
                self._run_init()
            replay = self._replay
            mailbox = self.mailbox
            handle = self._handle
            n = 0
            while self._quit_reason is None:
                if n >= max_msgs:
                    self.state = _READY
                    return _YIELDED
                if replay:
                    env = replay.popleft()
                else:
                    env = mailbox.dequeue()
                    if env is None:
                        if mailbox.try_block():
                            self.state = _WAITING
                            return _AWAITING
                        continue
                n += 1
                try:
                    handle(env)
                except Exception as exc:
                    self._fail(exc)
                    if not self._promised:
                        self._bounce(env, UNHANDLED_ERROR)
                replay = self._replay
            self._terminate(self._quit_reason)
            return _FINISHED
        finally:
            self._current = None
            self._running = False

    def _run_init(self) -> None:
        fn, args = self._factory, self._args
        self._factory = None
        self._args = _EMPTY
        try:
            b = fn(self, *args)
            if b is not None:
                self.become(b)
        except Exception as exc:
            self._fail(exc)
            return
        if self.behavior is None and not self._pending:
            self.quit(NORMAL)

    def _fail(self, exc: BaseException) -> None:
        self.error = exc
        log.error("actor %s terminated by unhandled %s: %s", self.addr.id, type(exc).__name__, exc,
                  exc_info=exc if log.isEnabledFor(logging.DEBUG) else None)
        self.quit(UNHANDLED_ERROR)

    def _handle(self, env: Envelope) -> None:
        mid = env.mid
        if mid & RESPONSE_BIT:
            self._on_response(env)
            return
        content = env.content
        types = content._p.types
        if len(types) == 1 and types[0] is EXIT_MSG and not self.trap_exit:
            reason = content._p.values[0].reason
            if not reason.is_normal:
                self.quit(link_propagated(reason))
            return
        if self._pending:
            if len(types) == 1 and types[0] is DOWN_MSG:
                down = content._p.values[0]
                front = self._pending[0]
                if down.source == front.target:
                    self._pending.popleft()
                    self._resolve(front, make_message(ErrorMsg(ErrorKind.DOWN, down.reason)), env)
                    self._after_resolve()
                    return
            self._retain(env)
            return
        behavior = self.behavior
        if behavior is None:
            self._retain(env)
            return
        self._current = env
        self._promised = False
        res = behavior.dispatch(content)
        if res is NO_MATCH:
            self._retain(env)
            return
        if self._promised:
            return
        if mid:
            if res is None:
                res = message_from(_EMPTY, _EMPTY)
            sender = env.sender
            if sender is not None:
                self.system._resolve(sender)._enqueue(Envelope(res, self.addr, mid | RESPONSE_BIT))
        elif res is not None:
            sender = env.sender
            if sender is not None:
                self.system._resolve(sender)._enqueue(Envelope(res, self.addr))

    def _on_response(self, env: Envelope) -> None:
        pend = self._pending
        if not pend:
            return
        rid = env.mid & _MID_MASK
        front = pend[0]
        if front.mid != rid:
            if any(p.mid == rid for p in pend):
                if self._early is None:
                    self._early = {}
                self._early[rid] = env
            return
        pend.popleft()
        self._resolve(front, env.content, env)
        self._after_resolve()

    def _after_resolve(self) -> None:
        pend = self._pending
        early = self._early
        while pend and early and pend[0].mid in early and self._quit_reason is None:
            p = pend.popleft()
            env = early.pop(p.mid)
            self._resolve(p, env.content, env)
        if not pend:
            self._schedule_replay()
            if self.behavior is None and self._quit_reason is None:
                self.quit(NORMAL)

    def _resolve(self, p: Pending, content: Message, env: Envelope) -> None:
        if p.timer is not None:
            p.timer.cancel()
        self._current = env
        if _is_single(content, ERROR_MSG):
            err = content._p.values[0]
            if p.error_handler is not None:
                p.error_handler(err)
            else:
                log.info("actor %s: unhandled request error %s", self.addr.id, err)
                self.quit(UNHANDLED_ERROR)
        elif p.handler is not None:
            p.handler(*content._p.values)

    def _retain(self, env: Envelope) -> None:
        if self._retained is None:
            self._retained = deque()
        self._retained.append(env)

    def _schedule_replay(self) -> None:
        retained = self._retained
        if retained:
            if self._replay:
                retained.extend(self._replay)
            self._replay = retained
            self._retained = None

    def _terminate(self, reason: ExitReason) -> None:
        self.state = _DONE
        with _STRIPES[self.addr.id & 63]:
            sealed = self._exit_reason is None
            if sealed:
                self._exit_reason = reason
                links, monitors = self._links, self._monitors
                self._links = self._monitors = None
        drained = self.mailbox.close()
        if self._retained or self._replay:
            leftovers = list(self._retained or _EMPTY)
            leftovers.extend(self._replay or _EMPTY)
            leftovers.extend(drained)
            drained = leftovers
            self._retained = self._replay = None
        for env in drained:
            self._bounce(env, reason)
        if self._pending:
            for p in self._pending:
                if p.timer is not None:
                    p.timer.cancel()
            self._pending = None
        self._early = None
        self.behavior = None
        if sealed and (links or monitors):
            self._notify(links, monitors, reason)
        # the address keeps pointing here so late senders see the exit reason;
        # the actor lets go of it, leaving no reference cycle to collect
        self.addr = self.addr.unbound()
        self.system._on_terminated(self)


class DetachedActor(LocalActor):
    """Actor with a dedicated thread; it may block without stalling workers."""

    __slots__ = ("_event", "_thread")

    def __init__(self, *args, **kwargs):
        LocalActor.__init__(self, *args, **kwargs)
        self._event = threading.Event()
        self._thread = threading.Thread(target=self._loop, name=f"cafx-detached-{self.addr.id}",
                                        daemon=True)

    def _wake(self) -> None:
        self._event.set()

    def _loop(self) -> None:
        ev = self._event
        while self.resume(None, UNLIMITED) is not _FINISHED:
            ev.wait()
            ev.clear()


class ScopedActor(LocalActor):
    """Actor facade for non-actor threads: blocking receive and request.

    Use as a context manager; leaving the block terminates it normally.
    """

    __slots__ = ("_event", "_stash")
    counted = False

    def __init__(self, system, addr):
        LocalActor.__init__(self, system, addr)
        self.state = _RUNNING
        self._event = threading.Event()
        self._stash: deque = deque()

    def _wake(self) -> None:
        self._event.set()

    def _next_envelope(self, timeout: float | None) -> Envelope | None:
        mb = self.mailbox
        ev = self._event
        while True:
            env = mb.dequeue()
            if env is not None:
                return env
            ev.clear()
            if mb.try_block():
                if not ev.wait(timeout):
                    if mb.try_unblock():
                        return None
                    continue

    def receive_envelope(self, timeout: float | None = None) -> Envelope:
        """Next envelope in arrival order; raises TimeoutError."""
        if self._stash:
            env = self._stash.popleft()
        else:
            env = self._next_envelope(timeout)
            if env is None:
                raise TimeoutError("no message received")
        self._current = env
        return env

    def receive(self, timeout: float | None = None) -> Message:
        env = self.receive_envelope(timeout)
        content = env.content
        if _is_single(content, EXIT_MSG) and not self.trap_exit:
            reason = content._p.values[0].reason
            if not reason.is_normal:
                self.close(link_propagated(reason))
                raise RuntimeError(f"scoped actor received exit signal {reason!r}")
        return content

    def request(self, target, *values, timeout: float | None = None) -> Message:
        """Blocking request. Raises TimeoutError or returns the response message.

        Error responses come back as a message holding a single ErrorMsg.
        Unrelated messages arriving meanwhile stay queued for :meth:`receive`.
        """
        msg = _msg(values)
        ref = self.system._ref_for(target, msg)
        self._next_mid += 1
        mid = self._next_mid
        want = mid | RESPONSE_BIT
        ref._enqueue(Envelope(msg, self.addr, mid))
        deadline = None if timeout is None else time.monotonic() + timeout
        while True:
            remaining = None if deadline is None else max(0.0, deadline - time.monotonic())
            env = self._next_envelope(remaining)
            if env is None:
                raise TimeoutError(f"no response within {timeout}s")
            if env.mid == want:
                self._current = env
                return env.content
            if env.mid & RESPONSE_BIT:
                continue  # stale response to an abandoned request
            self._stash.append(env)

    def close(self, reason: ExitReason = NORMAL) -> None:
        if self._exit_reason is None:
            self._terminate(reason)
            self.system._unregister(self)

    def _terminate(self, reason):
        for env in self._stash:
            self._retain(env)
        self._stash.clear()
        LocalActor._terminate(self, reason)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class ActorSystem:
    """Owns the scheduler, the actor registry, timers, and (lazily) the middleman."""

    def __init__(self, workers: int | None = None, max_msgs: int | None = None, policy=None,
                 node_id: bytes | None = None, registry=default_registry):
        self.node = node_id if node_id is not None else new_node_id()
        self.registry = registry
        self._sched_args = (policy, workers, max_msgs)
        self._coord: Coordinator | None = None
        self._ids = itertools.count(1)
        # only actors whose address left the process need an id lookup
        self._actors: dict[int, AbstractActor] = {}
        self._live = 0
        self._terminated = 0
        self._count_lock = threading.Lock()
        self._idle = threading.Event()
        self.timers = TimerService()
        self._middleman = None
        self._started = False
        self._lock = threading.Lock()

    # -- configuration ---------------------------------------------------
    def set_scheduler(self, policy=None, num_workers: int | None = None, max_msgs: int | None = None):
        if self._started:
            raise ConfigurationError("set_scheduler must be called before the runtime starts")
        self._sched_args = (policy, num_workers, max_msgs)

    def start(self) -> "ActorSystem":
        with self._lock:
            if not self._started:
                policy, workers, max_msgs = self._sched_args
                self._coord = Coordinator(policy, workers, max_msgs)
                self._coord.start()
                self._started = True
        return self

    @property
    def scheduler(self) -> Coordinator:
        if not self._started:
            self.start()
        return self._coord

    @property
    def middleman(self):
        if self._middleman is None:
            from .middleman import Middleman
            with self._lock:
                if self._middleman is None:
                    self._middleman = Middleman(self)
        return self._middleman

    # -- spawning ----------------------------------------------------------
    def _new_addr(self) -> ActorAddr:
        return ActorAddr(self.node, next(self._ids))

    def _register(self, actor: AbstractActor) -> None:
        with self._count_lock:
            self._live += 1

    def expose(self, actor: AbstractActor) -> None:
        """Make ``actor`` resolvable by id, e.g. once its address was sent to a peer."""
        if actor._exit_reason is None:
            self._actors[actor.addr.id] = actor

    def _unregister(self, actor: AbstractActor) -> None:
        self._actors.pop(actor.addr.id, None)

    def _on_terminated(self, actor: LocalActor) -> None:
        if self._actors:
            self._actors.pop(actor.addr.id, None)
        if not actor.counted:
            return
        with self._count_lock:
            self._live -= 1
            self._terminated += 1
            if self._live == 0:
                self._idle.set()

    def spawn(self, fn, *args, detached: bool = False, name: str | None = None) -> ActorHandle:
        if not self._started:
            self.start()
        addr = ActorAddr(self.node, next(self._ids))
        if detached:
            actor = DetachedActor(self, addr, fn, args, name=name)
            self._register(actor)
            actor._thread.start()
        else:
            actor = LocalActor(self, addr, fn, args, None, name)
            with self._count_lock:
                self._live += 1
            self._coord.schedule(actor)
        return ActorHandle(addr)

    def spawn_typed(self, iface: MessagingInterface, fn, *args, detached: bool = False,
                    name: str | None = None) -> TypedHandle:
        """Spawn an actor whose every behavior must implement ``iface`` exactly.

        The factory runs immediately so a mismatch raises here.
        """
        if not self._started:
            self.start()
        cls = DetachedActor if detached else LocalActor
        actor = cls(self, self._new_addr(), None, _EMPTY, iface=iface, name=name)
        b = _as_behavior(fn(actor, *args))
        got = derive_interface(b) if b is not None else None
        if got != iface:
            actor.mailbox.close()
            actor._exit_reason = UNHANDLED_ERROR
            raise InterfaceMismatch(f"behavior implements {got}, declared {iface}")
        actor.behavior = b
        self._register(actor)
        if detached:
            actor._thread.start()
        else:
            self._coord.schedule(actor)
        return TypedHandle(actor.addr, iface)

    def scoped(self) -> ScopedActor:
        if not self._started:
            self.start()
        return ScopedActor(self, self._new_addr())

    # -- messaging from outside actors ---------------------------------------
    def send(self, target, *values, sender=None) -> None:
        msg = _msg(values)
        src = sender.addr if isinstance(sender, AbstractActor) else sender
        self._ref_for(target, msg)._enqueue(Envelope(msg, src))

    def send_exit(self, target, reason: ExitReason) -> None:
        """Deliver an exit signal, as if sent by a linked actor that died."""
        ref = self._ref_for(target)
        ref._enqueue(Envelope(make_message(ExitMsg(ref.addr, reason)), None))

    def _ref_for(self, target, msg: Message | None = None) -> AbstractActor:
        tp = type(target)
        if tp is ActorAddr:
            addr = target
        elif tp is ActorHandle:
            addr = target.addr
        elif tp is TypedHandle:
            if msg is not None and target.iface.accepts(msg) is None:
                raise InterfaceMismatch(
                    f"signature {list(msg.types)} is not accepted by the handle's interface")
            addr = target.addr
        elif isinstance(target, AbstractActor):
            return target
        else:
            raise TypeError(f"cannot send to {target!r}")
        ref = addr._ref
        if ref is None:
            ref = self._resolve(addr)
        return ref

    def _resolve(self, addr: ActorAddr) -> AbstractActor:
        ref = addr._ref
        if ref is not None:
            return ref
        if addr.node == self.node:
            ref = self._actors.get(addr.id)
            if ref is None:
                return _DeadActor(self, addr)
        elif self._middleman is not None:
            ref = self._middleman.proxy_for(addr)
            if ref is None:
                return _DeadActor(self, addr, UNREACHABLE)
        else:
            return _DeadActor(self, addr)
        addr._ref = ref
        return ref

    def lookup(self, actor_id: int) -> AbstractActor | None:
        return self._actors.get(actor_id)

    # -- network -------------------------------------------------------------
    def publish(self, handle, port: int = 0, host: str = "127.0.0.1") -> int:
        return self.middleman.publish(handle, port, host)

    def remote_actor(self, host: str, port: int, expected: MessagingInterface | None = None,
                     timeout: float = 5.0):
        return self.middleman.remote_actor(host, port, expected, timeout)

    # -- lifecycle -----------------------------------------------------------
    @property
    def live_actors(self) -> int:
        return self._live

    @property
    def terminated_actors(self) -> int:
        return self._terminated

    def await_all_actors_done(self, timeout: float | None = None) -> bool:
        deadline = None if timeout is None else time.monotonic() + timeout
        while self._live:
            self._idle.clear()
            if not self._live:
                break
            wait = 0.01 if deadline is None else min(0.01, deadline - time.monotonic())
            if wait <= 0:
                return False
            self._idle.wait(wait)
        return True

    def shutdown(self) -> None:
        if self._middleman is not None:
            self._middleman.stop()
        self.timers.stop()
        if self._coord is not None:
            self._coord.stop()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.shutdown()


__all__ = [
    "ActorSystem", "ActorState", "LocalActor", "DetachedActor", "ScopedActor", "AbstractActor",
    "Envelope", "Pending", "ResponsePromise", "RESPONSE_BIT",
]
