"""Kernel backend selection.

The compiled extension (``prefalign._speed``) accelerates the per-token
sampling and objective loops; the pure-Python twin in ``prefalign._pure`` is
selected when the extension is unavailable or when ``PREFALIGN_PURE_PYTHON``
is set to a non-empty value.  Both produce bit-identical results (verified by
the backend-parity tests), so the choice affects speed only.
"""

from __future__ import annotations

import os

from . import _pure

if os.environ.get("PREFALIGN_PURE_PYTHON"):
    _impl = _pure
else:
    try:
        from . import _speed as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _pure

BACKEND_NAME: str = _impl.BACKEND_NAME
sample_episode = _impl.sample_episode
objective = _impl.objective


def get_backend(name: str | None = None):
    """Return the kernel module: the active one, or 'pure'/'compiled' by name."""
    if name is None:
        return _impl
    if name == "pure":
        return _pure
    if name == "compiled":
        from . import _speed

        return _speed
    raise ValueError(f"unknown backend {name!r}")
