"""Backend selection for the payoff quadrature.

The compiled extension is used when it imports; otherwise the numpy
implementation.  Setting ``SABRLAB_PURE_PYTHON=1`` forces the fallback.
"""

from __future__ import annotations

import os
from functools import lru_cache

import numpy as np

from . import _kernels_py

if os.environ.get("SABRLAB_PURE_PYTHON", "") not in ("", "0"):
    _backend = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _backend  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        _backend = _kernels_py
        BACKEND = "python"

GL_POINTS = 20
OSC_THRESHOLD = 50.0


@lru_cache(maxsize=8)
def gauss_legendre(n: int = GL_POINTS) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def g_values(
    u,
    sigma0: float,
    s_minus: float = 0.0,
    unit: bool = False,
    refine: int = 1,
    min_panels: int = 4,
    osc_threshold: float = OSC_THRESHOLD,
    backend=None,
) -> np.ndarray:
    """Evaluate the payoff integral at each point of ``u`` with a fixed rule."""
    xg, wg = gauss_legendre()
    be = _backend if backend is None else backend
    u = np.ascontiguousarray(np.atleast_1d(np.asarray(u, dtype=np.float64)))
    return be.g_values(u, float(sigma0), float(s_minus), bool(unit), xg, wg, int(refine), int(min_panels), float(osc_threshold))


def panel_count(
    u: float, sigma0: float, s_minus: float = 0.0, unit: bool = False, min_panels: int = 4,
    osc_threshold: float = OSC_THRESHOLD,
) -> int:
    return int(_backend.panel_count(float(u), float(sigma0), float(s_minus), bool(unit), int(min_panels), float(osc_threshold)))
