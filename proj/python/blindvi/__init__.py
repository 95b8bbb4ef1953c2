"""Blind MIMO channel estimation by variational inference."""

from ._blindvi import *  # noqa: F401,F403
from ._blindvi import __doc__  # noqa: F401

__version__ = "0.1.0"
