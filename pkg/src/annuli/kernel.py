"""Mesh energy kernel selection.

The compiled extension is used when it imports and ``ANNULI_PURE_PYTHON`` is
unset (or ``0``); otherwise the numpy implementation is used.
"""

import logging
import os

log = logging.getLogger(__name__)


def _load():
    if os.environ.get("ANNULI_PURE_PYTHON", "0") not in ("", "0"):
        from . import _pykernel
        return _pykernel, "python"
    try:
        from . import _ckernel
    except ImportError:
        log.info("compiled mesh kernel unavailable; using the numpy fallback")
        from . import _pykernel
        return _pykernel, "python"
    return _ckernel, "cython"


_impl, BACKEND = _load()
cell_moduli = _impl.cell_moduli
assemble = _impl.assemble
