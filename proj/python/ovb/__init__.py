"""Sequential Gaussian posterior updates: solvers, metrics, experiments.

The compiled core lives in the ``_ovb`` extension module. When the package is
installed (pip / scikit-build-core) the extension sits inside this package;
during development it can also be picked up from a CMake build tree via the
``OVB_MODULE_DIR`` environment variable.
"""

import os
import sys

try:
    from ._ovb import *  # noqa: F401,F403
    from ._ovb import __doc__ as _core_doc  # noqa: F401
except ImportError:  # pragma: no cover - build-tree fallback
    _module_dir = os.environ.get("OVB_MODULE_DIR")
    if _module_dir and _module_dir not in sys.path:
        sys.path.insert(0, _module_dir)
    from _ovb import *  # noqa: F401,F403
