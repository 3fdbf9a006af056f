"""IO brokers on a single event loop, and the node-to-node actor transport."""
from .basp import BaspFrame, Op, ProxyActor, decode_header
from .broker import Broker, Middleman
from .events import (AcceptHandle, AcceptorClosedMsg, ConnectionClosedMsg, ConnectionHandle,
                     NewConnectionMsg, NewDataMsg, ReadMode, ReceivePolicy, at_least, at_most,
                     exactly)
from .transport import TCP, PipeNetwork, TcpTransport

__all__ = [
    "Middleman", "Broker", "BaspFrame", "Op", "ProxyActor", "decode_header",
    "AcceptHandle", "ConnectionHandle", "NewConnectionMsg", "NewDataMsg", "ConnectionClosedMsg",
    "AcceptorClosedMsg", "ReadMode", "ReceivePolicy", "at_least", "at_most", "exactly",
    "TCP", "TcpTransport", "PipeNetwork",
]
