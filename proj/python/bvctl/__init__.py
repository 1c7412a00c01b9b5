"""Python bindings for the bvctl solver library."""

from ._bvctl import *  # noqa: F401,F403
from ._bvctl import __version__  # noqa: F401
