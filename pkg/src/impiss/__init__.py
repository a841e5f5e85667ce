"""Input-to-state stability tools for impulsive and switched impulsive systems."""

__version__ = "0.1.0"

from . import certify, comparison, exprdsl, funcspace, hybridsim, timing  # noqa: E402,F401
