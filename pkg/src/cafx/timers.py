"""One background thread firing delayed callbacks (request timeouts, delayed sends)."""
from __future__ import annotations

import heapq
import itertools
import logging
import threading
import time

log = logging.getLogger("cafx.timers")


class TimerHandle:
    __slots__ = ("deadline", "seq", "fn", "cancelled")

    def __init__(self, deadline, seq, fn):
        self.deadline = deadline
        self.seq = seq
        self.fn = fn
        self.cancelled = False

    def cancel(self):
        self.cancelled = True
        self.fn = None

    def __lt__(self, other):
        return (self.deadline, self.seq) < (other.deadline, other.seq)


class TimerService:
    def __init__(self):
        self._heap: list[TimerHandle] = []
        self._cond = threading.Condition()
        self._seq = itertools.count()
        self._thread: threading.Thread | None = None
        self._stopped = False

    def schedule(self, delay: float, fn) -> TimerHandle:
        h = TimerHandle(time.monotonic() + max(0.0, delay), next(self._seq), fn)
        with self._cond:
            if self._stopped:
                raise RuntimeError("timer service stopped")
            heapq.heappush(self._heap, h)
            if self._thread is None:
                self._thread = threading.Thread(target=self._run, name="cafx-timers", daemon=True)
                self._thread.start()
            if self._heap[0] is h:
                self._cond.notify()
        return h

    def _run(self):
        heap = self._heap
        while True:
            with self._cond:
                while not self._stopped:
                    if heap:
                        wait = heap[0].deadline - time.monotonic()
                        if wait <= 0:
                            break
                        self._cond.wait(wait)
                    else:
                        self._cond.wait()
                if self._stopped:
                    return
                h = heapq.heappop(heap)
            fn = h.fn
            if fn is not None and not h.cancelled:
                try:
                    fn()
                except Exception:
                    log.exception("timer callback failed")

    def stop(self):
        with self._cond:
            self._stopped = True
            self._cond.notify_all()
        if self._thread is not None and self._thread is not threading.current_thread():
            self._thread.join(2.0)
