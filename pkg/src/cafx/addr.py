"""Actor identity: (16-byte node id, 32-bit actor id)."""
from __future__ import annotations

import os

NODE_ID_SIZE = 16
INVALID_ACTOR_ID = 0


def new_node_id() -> bytes:
    return os.urandom(NODE_ID_SIZE)


class ActorAddr:
    """Globally unique actor identifier.

    Equality and hashing use only ``(node, id)``. A local address also keeps a
    reference to the actor (or proxy) it names so that it can be used to send
    messages; that reference is invisible to comparisons and never serialized.
    """

    __slots__ = ("node", "id", "_ref")

    def __init__(self, node: bytes, actor_id: int, ref=None):
        if len(node) != NODE_ID_SIZE:
            raise ValueError(f"node id must be {NODE_ID_SIZE} bytes")
        if not 0 <= actor_id < 2**32:
            raise ValueError("actor id must fit into 32 bits")
        self.node = node
        self.id = actor_id
        self._ref = ref

    def __eq__(self, other):
        if not isinstance(other, ActorAddr):
            return NotImplemented
        return self.id == other.id and self.node == other.node

    def __hash__(self):
        return hash((self.node, self.id))

    def __repr__(self):
        return f"ActorAddr({self.node.hex()[:8]}, {self.id})"

    @property
    def valid(self) -> bool:
        return self.id != INVALID_ACTOR_ID

    @property
    def ref(self):
        return self._ref

    def unbound(self) -> "ActorAddr":
        """Same identity without the actor reference."""
        a = ActorAddr.__new__(ActorAddr)
        a.node = self.node
        a.id = self.id
        a._ref = None
        return a
