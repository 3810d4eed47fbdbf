"""Client for the ssl-pathlab environment wire protocol."""

from .client import ProtocolError, RemoteEnv, make

__all__ = ["RemoteEnv", "ProtocolError", "make"]
__version__ = "0.1.0"
