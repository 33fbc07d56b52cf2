"""Spectral Galerkin laboratory for the stochastic hybrid KdV-Burgers equation."""

try:
    from ._hkdvb import *  # noqa: F401,F403
    from ._hkdvb import __version__  # noqa: F401
except ImportError:  # in-tree builds put the extension on sys.path directly
    from _hkdvb import *  # noqa: F401,F403
    from _hkdvb import __version__  # noqa: F401
