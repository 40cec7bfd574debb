"""Backend selection for the hot kernels.

The compiled extension is used when it imports; set ``DGRAMSEY_PURE=1`` to
force the numpy fallback. Both expose ``fold_batch`` and ``search_copy``.
"""

from __future__ import annotations

import os

from . import _kernels_py

python_backend = _kernels_py
compiled_backend = None

if not os.environ.get("DGRAMSEY_PURE"):
    try:
        from . import _kernels as compiled_backend  # type: ignore[no-redef]
    except ImportError:  # extension not built
        compiled_backend = None

active = compiled_backend or python_backend
BACKEND = active.BACKEND


def get(name: str | None = None):
    """Return a backend module by name ('compiled', 'python') or the active one."""
    if name is None:
        return active
    if name == "python":
        return python_backend
    if name == "compiled":
        if compiled_backend is None:
            raise ImportError("compiled kernels are not available")
        return compiled_backend
    raise ValueError(f"unknown backend {name!r}")
