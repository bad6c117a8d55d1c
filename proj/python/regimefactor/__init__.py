"""High-dimensional factor models with regime-switching loadings.

Simulation, EM estimation (static and Markov-smoothed), regime probability
smoothing, and business-cycle turning-point detection. The heavy lifting
lives in the compiled extension; this package re-exports its surface.
"""

try:
    from ._rfm import *  # noqa: F401,F403  (wheel layout: extension inside the package)
    from . import _rfm as _impl
except ImportError:  # in-tree builds leave _rfm next to the build directory
    from _rfm import *  # noqa: F401,F403
    import _rfm as _impl

__version__ = _impl.__version__
__all__ = sorted(name for name in dir(_impl) if not name.startswith("_"))


def cli_path():
    """Path to the bundled command line binary, or None outside a wheel install."""
    import os

    path = os.path.join(os.path.dirname(__file__), "bin", "regimefactor")
    return path if os.path.exists(path) else None
