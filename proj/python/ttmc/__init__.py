"""Test-time adaptive merging of classifier checkpoints."""

from ttmc._core import *  # noqa: F401,F403
from ttmc._core import __doc__  # noqa: F401

__version__ = "0.1.0"
