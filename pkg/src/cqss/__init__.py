"""Simulator and analysis toolkit for circular quantum secret sharing."""

from . import qstate
from . import protocol
from . import epr_qudit
from . import adversary
from . import analysis

__version__ = "0.1.0"
