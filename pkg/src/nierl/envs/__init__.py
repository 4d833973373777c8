from .base import InvalidConfigError, InvalidStateError
from . import doorkey, twostage

__all__ = ["InvalidConfigError", "InvalidStateError", "doorkey", "twostage"]
