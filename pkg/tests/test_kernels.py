from __future__ import annotations

import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sabrlab import _kernels_py, kernels

compiled = pytest.importorskip("sabrlab._kernels")


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")


def test_env_forces_fallback():
    env = dict(os.environ, SABRLAB_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "import sabrlab.kernels as k; print(k.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


def test_gauss_legendre_is_read_only():
    x, w = kernels.gauss_legendre()
    assert len(x) == kernels.GL_POINTS
    assert abs(w.sum() - 2.0) < 1e-14
    with pytest.raises(ValueError):
        x[0] = 0.0


@settings(max_examples=60)
@given(
    st.lists(st.floats(1e-4, 7.0), min_size=1, max_size=8),
    st.floats(0.01, 300.0),
    st.floats(0.0, 0.8),
    st.booleans(),
    st.integers(1, 4),
)
def test_backends_agree(us, sigma0, s_minus, unit, refine):
    u = np.array(us) + s_minus
    a = kernels.g_values(u, sigma0, s_minus, unit, refine=refine, backend=compiled)
    b = kernels.g_values(u, sigma0, s_minus, unit, refine=refine, backend=_kernels_py)
    # oscillatory cancellation leaves g far below the panel magnitudes, so the
    # summation-order rounding is measured against the envelope pi/sqrt2 cosh(u/2)
    envelope = np.pi / np.sqrt(2.0) * np.cosh(u / 2)
    assert np.all(np.abs(a - b) <= 1e-13 * envelope)


@settings(max_examples=40)
@given(st.floats(1e-3, 8.0), st.floats(0.01, 500.0), st.floats(0.0, 0.5), st.integers(1, 8))
def test_panel_counts_agree(u, sigma0, s_minus, min_panels):
    u += s_minus
    a = compiled.panel_count(u, sigma0, s_minus, False, min_panels, kernels.OSC_THRESHOLD)
    b = _kernels_py.panel_count(u, sigma0, s_minus, False, min_panels, kernels.OSC_THRESHOLD)
    assert a == b


def test_oscillation_panels_switch_on():
    # below the threshold only the base panels are used
    assert kernels.panel_count(1.0, 10.0) == 4
    assert kernels.panel_count(3.0, 100.0) > 100


def test_below_lower_limit_is_zero():
    assert kernels.g_values([0.1], 1.0, 0.2)[0] == 0.0
