"""cafx: an actor runtime with typed messaging, work stealing, and network transparency."""
from .addr import ActorAddr
from .atom import AtomValue, atom, atom_decode, atom_encode
from .behavior import Behavior, Mutable, case, guard, on, others, project
from .errors import (AccessError, AtomError, CafxError, CodecError, ConfigurationError,
                     HandshakeError, InterfaceMismatch, RegistryError, SpawnError)
from .interface import (ActorHandle, MessagingInterface, TypedHandle, is_subset, narrow,
                        reacts_to, replies_to, to_dynamic, typed_actor)
from .message import (ADDR, ATOM, BOOL, BYTES, F32, F64, I8, I16, I32, I64, TEXT, U8, U16, U32,
                      U64, Message, TypeRegistry, copy_stats, default_registry, deserialize,
                      make_message, serialize)
from .runtime import ActorSystem, LocalActor, ScopedActor
from .scheduler import Coordinator, ResumeResult, WorkStealingPolicy
from .sysmsg import (NORMAL, UNHANDLED_ERROR, UNKNOWN_ACTOR, UNREACHABLE, DownMsg, ErrorKind,
                     ErrorMsg, ExitMsg, ExitReason, link_propagated, user_reason)
from . import middleman  # noqa: F401  registers the broker event types

__version__ = "0.1.0"
