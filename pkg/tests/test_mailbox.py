import threading

from cafx.mailbox import BLOCKED, CLOSED, CachedStackMailbox, EnqueueResult, Node

from _helpers import mailbox_stress


def test_fifo_single_writer():
    mb = CachedStackMailbox()
    for i in range(10):
        assert mb.enqueue(Node(i)) is EnqueueResult.SUCCESS
    assert [mb.dequeue().value for _ in range(10)] == list(range(10))
    assert mb.dequeue() is None


def test_fetch_takes_whole_stack_with_one_cas():
    mb = CachedStackMailbox()
    for i in range(5):
        mb.enqueue(Node(i))
    ops = mb.cas_ops
    mb.dequeue()
    assert mb.cas_ops == ops + 1
    for _ in range(4):
        mb.dequeue()
    assert mb.cas_ops == ops + 1  # served from the cache


def test_block_and_unblock_protocol():
    mb = CachedStackMailbox()
    assert mb.try_block()
    assert mb.blocked
    assert mb.enqueue(Node("a")) is EnqueueResult.UNBLOCKED_READER
    assert mb.enqueue(Node("b")) is EnqueueResult.SUCCESS
    assert not mb.try_block()
    assert [mb.dequeue().value, mb.dequeue().value] == ["a", "b"]
    assert mb.try_block() and mb.try_unblock()
    assert not mb.blocked


def test_close_rejects_and_drains_in_order():
    mb = CachedStackMailbox()
    for i in range(3):
        mb.enqueue(Node(i))
    mb.dequeue()  # 0 consumed, 1 and 2 in the cache
    mb.enqueue(Node(3))
    drained = mb.close()
    assert [n.value for n in drained] == [1, 2, 3]
    assert mb.closed and mb._tail is CLOSED
    assert mb.enqueue(Node(4)) is EnqueueResult.REJECTED_CLOSED
    assert mb.close() == []


def test_close_while_blocked():
    mb = CachedStackMailbox()
    mb.try_block()
    assert mb._tail is BLOCKED
    assert mb.close() == []


def test_only_one_writer_sees_the_unblock():
    mb = CachedStackMailbox()
    mb.try_block()
    results = []
    lock = threading.Lock()

    def w(i):
        r = mb.enqueue(Node(i))
        with lock:
            results.append(r)
    ts = [threading.Thread(target=w, args=(i,)) for i in range(16)]
    for t in ts:
        t.start()
    for t in ts:
        t.join()
    assert results.count(EnqueueResult.UNBLOCKED_READER) == 1


def test_stress_small():
    received, violations, _ = mailbox_stress(4, 5000)
    assert received == 20000
    assert violations == 0
