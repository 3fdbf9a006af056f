import threading

import pytest

from cafx import ActorSystem, Behavior, ConfigurationError, Coordinator, I32, ResumeResult, WorkStealingPolicy

from _helpers import imbalance_run


class Job:
    def __init__(self, log=None, yields=0):
        self.log = log if log is not None else []
        self.left = yields

    def resume(self, worker, max_msgs):
        self.log.append(worker.index)
        if self.left:
            self.left -= 1
            return ResumeResult.YIELDED
        return ResumeResult.FINISHED


def test_round_robin_before_stealing():
    coord = Coordinator(WorkStealingPolicy(), 4)
    for _ in range(8):
        coord.schedule(Job())
    assert coord.policy.stats()["queued"] == [2, 2, 2, 2]


def test_jobs_run_and_hooks_balance():
    coord = Coordinator(WorkStealingPolicy(), 3)
    log = []
    jobs = [Job(log, yields=i % 3) for i in range(30)]
    coord.start()
    for j in jobs:
        coord.schedule(j)
    import time
    deadline = time.monotonic() + 5
    while coord.policy.stats()["after_completion"] < 30 and time.monotonic() < deadline:
        time.sleep(0.01)
    coord.stop()
    s = coord.policy.stats()
    assert s["after_completion"] == 30
    assert s["before_resume"] == s["after_resume"] == 30 + sum(i % 3 for i in range(30))
    assert len(log) == s["before_resume"]


def test_internal_enqueue_goes_to_front():
    coord = Coordinator(WorkStealingPolicy(), 1)
    w = coord.workers[0]
    a, b = Job(), Job()
    coord.policy.external_enqueue(w, a)
    coord.policy.internal_enqueue(w, b)
    assert coord.policy.dequeue(w) is b


def test_idle_worker_steals_from_back():
    coord = Coordinator(WorkStealingPolicy(), 2)
    w0, w1 = coord.workers
    jobs = [Job() for _ in range(3)]
    for j in jobs:
        coord.policy.external_enqueue(w0, j)
    assert coord.policy.dequeue(w1) is jobs[-1]
    assert coord.policy.stats()["steals"] == 1


def test_invalid_configuration():
    with pytest.raises(ConfigurationError):
        Coordinator(None, 0)
    with pytest.raises(ConfigurationError):
        Coordinator(None, 1, 0)
    s = ActorSystem(workers=1).start()
    try:
        with pytest.raises(ConfigurationError):
            s.set_scheduler(num_workers=2)
    finally:
        s.shutdown()


def test_env_configuration(monkeypatch):
    monkeypatch.setenv("CAFX_WORKERS", "3")
    monkeypatch.setenv("CAFX_MAX_MSGS", "7")
    c = Coordinator()
    assert (c.num_workers, c.max_msgs) == (3, 7)
    monkeypatch.setenv("CAFX_WORKERS", "three")
    with pytest.raises(ConfigurationError):
        Coordinator()


def test_max_msgs_budget_yields():
    policy = WorkStealingPolicy()
    with ActorSystem(workers=1, max_msgs=2, policy=policy) as s:
        done = threading.Event()

        def counter(self):
            n = [0]

            def f(i: I32):
                n[0] += 1
                if n[0] == 10:
                    done.set()
                    self.quit()
            return Behavior(f)
        h = s.spawn(counter)
        for i in range(10):
            s.send(h, i)
        assert done.wait(5)
        assert s.await_all_actors_done(5)
    st = policy.stats()
    assert st["before_resume"] == st["after_resume"]
    assert st["after_completion"] == s.terminated_actors


def test_imbalanced_load_is_stolen():
    elapsed, stats, total = imbalance_run(workers=4, jobs=8, n=400, it=3000)
    assert stats["steals"] >= 1
    assert stats["before_resume"] == stats["after_resume"]
    assert stats["after_completion"] == 8 + 1
    _, _, total1 = imbalance_run(workers=1, jobs=8, n=400, it=3000)
    assert total == total1
