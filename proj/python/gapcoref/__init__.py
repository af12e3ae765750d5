"""Gendered pronoun resolution toolkit."""

from ._gapcoref import *  # noqa: F401,F403
from ._gapcoref import GapcorefError, __doc__  # noqa: F401

__version__ = "0.1.0"
