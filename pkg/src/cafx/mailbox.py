"""Single-reader, many-writer mailbox: an atomic stack plus a reader-side FIFO cache.

Writers push onto the stack with one compare-and-swap. The reader pops from
its private cache; when the cache runs dry it takes the whole stack with one
CAS (tail -> empty) and moves the nodes into the cache in reverse order.

Two sentinel tail values carry the reader protocol:

* ``BLOCKED`` - the reader found the mailbox empty and parked. The writer
  that replaces it learns it must reschedule the reader (``UNBLOCKED_READER``).
* ``CLOSED`` - the owner terminated; further enqueues are rejected.
"""
from __future__ import annotations

import threading
from collections import deque
from enum import IntEnum


class _Sentinel:
    __slots__ = ("name",)

    def __init__(self, name):
        self.name = name

    def __repr__(self):
        return self.name


BLOCKED = _Sentinel("BLOCKED")
CLOSED = _Sentinel("CLOSED")


class EnqueueResult(IntEnum):
    UNBLOCKED_READER = 1
    SUCCESS = 2
    REJECTED_CLOSED = 3


_UNBLOCKED = EnqueueResult.UNBLOCKED_READER
_SUCCESS = EnqueueResult.SUCCESS
_REJECTED = EnqueueResult.REJECTED_CLOSED


class Node:
    """Minimal mailbox node; anything with a writable ``next`` slot works."""

    __slots__ = ("next", "value")

    def __init__(self, value=None):
        self.next = None
        self.value = value


class CachedStackMailbox:
    """Mailbox over a compare-and-set tail cell.

    CPython offers no user-level CAS instruction, so each compare-and-set
    runs under a private lock held for exactly the compare and the store.
    Plain loads of ``_tail`` are atomic under the interpreter.
    """

    __slots__ = ("_tail", "_lock", "_cas", "_cache")

    def __init__(self):
        self._tail = None
        self._lock = threading.Lock()
        self._cas = 0
        self._cache: deque = deque()

    def _compare_and_set(self, expected, new) -> bool:
        with self._lock:
            self._cas += 1
            if self._tail is expected:
                self._tail = new
                return True
            return False

    # -- writer side (any thread) ----------------------------------------
    def enqueue(self, node) -> EnqueueResult:
        cas = self._compare_and_set
        while True:
            old = self._tail
            if old is CLOSED:
                return _REJECTED
            if old is BLOCKED:
                node.next = None
                if cas(BLOCKED, node):
                    return _UNBLOCKED
            else:
                node.next = old
                if cas(old, node):
                    return _SUCCESS

    # -- reader side (owner only) ----------------------------------------
    def _fetch(self) -> bool:
        """Move the stack into the cache. Exactly one CAS when nodes are taken."""
        while True:
            head = self._tail
            if head is None or head is BLOCKED or head is CLOSED:
                return False
            if self._compare_and_set(head, None):
                break
        cache = self._cache
        # newest first on the stack; appendleft restores arrival order
        while head is not None:
            cache.appendleft(head)
            head = head.next
        return True

    def dequeue(self):
        cache = self._cache
        if cache or self._fetch():
            node = cache.popleft()
            node.next = None
            return node
        return None

    def try_block(self) -> bool:
        """Park the reader if nothing is pending. False means new work arrived."""
        if self._cache:
            return False
        return self._compare_and_set(None, BLOCKED)

    def try_unblock(self) -> bool:
        """Undo ``try_block`` from the reader side (used by detached readers)."""
        return self._compare_and_set(BLOCKED, None)

    def close(self) -> list:
        """Close the mailbox and return all pending nodes in FIFO order."""
        while True:
            head = self._tail
            if head is CLOSED:
                return []
            if self._compare_and_set(head, CLOSED):
                break
        cache = self._cache
        if head is None or head is BLOCKED:
            if not cache:
                return []
            head = None
        drained = list(cache)
        cache.clear()
        chain = []
        while head is not None:
            chain.append(head)
            head = head.next
        drained.extend(reversed(chain))
        for node in drained:
            node.next = None
        return drained

    # -- introspection ---------------------------------------------------
    @property
    def closed(self) -> bool:
        return self._tail is CLOSED

    @property
    def blocked(self) -> bool:
        return self._tail is BLOCKED

    def empty(self) -> bool:
        t = self._tail
        return not self._cache and (t is None or t is BLOCKED or t is CLOSED)

    @property
    def cas_ops(self) -> int:
        return self._cas
