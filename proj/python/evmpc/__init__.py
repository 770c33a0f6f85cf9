"""Decentralized MPC for EV charging coordinated by dual prices."""

from ._evmpc import *  # noqa: F401,F403
from ._evmpc import __version__  # noqa: F401
