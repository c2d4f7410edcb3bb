"""Backend selection for the hot kernels.

The compiled ``_ckernels`` extension is used when importable; otherwise the
pure-Python ``_pykernels`` module provides identical results, only slower.
Set ``GRAPHCBR_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

if os.environ.get("GRAPHCBR_PURE_PYTHON") == "1":
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = _impl.BACKEND
assign_min = _impl.assign_min
pair_values = _impl.pair_values
pair_detail = _impl.pair_detail
question_rr = _impl.question_rr
scan_split = _impl.scan_split

python = _pykernels
