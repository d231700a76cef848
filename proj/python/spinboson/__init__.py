"""Relaxation rates and level-shift checks for the spin-boson model."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
