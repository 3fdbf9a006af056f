class CafxError(Exception):
    """Base class for errors raised by the runtime."""


class AtomError(CafxError, ValueError):
    pass


class CodecError(CafxError, ValueError):
    """Malformed, truncated, or unknown wire data."""


class RegistryError(CafxError, TypeError):
    """A value's type is not registered, or registration conflicts."""


class AccessError(CafxError, IndexError):
    pass


class InterfaceMismatch(CafxError, TypeError):
    """A messaging interface does not satisfy the required subset relation."""


class ConfigurationError(CafxError, RuntimeError):
    pass


class SpawnError(CafxError, OSError):
    """Spawning an IO broker failed because binding or connecting failed."""


class HandshakeError(CafxError, ConnectionError):
    pass
