"""Energy-aware federated training simulator bindings."""

try:
    from ._approxfl import *  # noqa: F401,F403
    from ._approxfl import __doc__, __version__  # noqa: F401
except ImportError:  # build-tree layout: module sits next to the package dir
    from _approxfl import *  # noqa: F401,F403
    from _approxfl import __doc__, __version__  # noqa: F401
