import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairconformal import _backend, _fallback

try:
    from fairconformal import _kernels
except ImportError:  # extension not built
    _kernels = None

compiled = pytest.mark.skipif(_kernels is None, reason="compiled extension not built")


def test_backend_selected():
    forced = os.environ.get("FAIRCONFORMAL_PURE_PYTHON", "") in ("1", "true", "yes")
    expected = "cython" if _kernels is not None and not forced else "python"
    assert _backend.BACKEND == expected


def test_env_var_forces_fallback():
    out = subprocess.run(
        [sys.executable, "-c", "import fairconformal; print(fairconformal.BACKEND)"],
        env={**os.environ, "FAIRCONFORMAL_PURE_PYTHON": "1"}, capture_output=True, text=True,
        check=True,
    )
    assert out.stdout.strip() == "python"


@compiled
@given(st.lists(st.integers(-20, 20), min_size=1, max_size=50),
       st.lists(st.integers(-20, 20), min_size=1, max_size=50))
@settings(max_examples=100, deadline=None)
def test_ks_agrees(a, b):
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    assert _kernels.ks_sorted(a, b) == _fallback.ks_sorted(a, b)


@compiled
@pytest.mark.parametrize("kernel", [0, 1])
@pytest.mark.parametrize("h", [0.01, 0.1, 0.3])
def test_kernel_smooth_agrees(kernel, h):
    rng = np.random.default_rng(0)
    f = np.cumsum(rng.exponential(size=3000))
    dv = 1.0 / 2047
    support = h if kernel == 0 else min(4 * h, 1.0)
    t = (np.arange(512) + 0.5) / 512
    start = -((3000 - 2048) // 2) * dv
    a = _kernels.kernel_smooth(f, start, dv, t, h, support, kernel)
    b = _fallback.kernel_smooth(f, start, dv, t, h, support, kernel)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-9)


@compiled
@pytest.mark.parametrize("alpha", [0.05, 0.5, 0.9])
def test_subgradient_agrees(alpha):
    rng = np.random.default_rng(1)
    Z = np.column_stack([np.ones(500), rng.normal(size=(500, 3))])
    y = Z @ [0.5, 1.0, -2.0, 0.0] + rng.normal(size=500)
    a = _kernels.subgradient_pinball(Z, y, alpha, 800, 1.0, 1e-8, 50)
    b = _fallback.subgradient_pinball(Z, y, alpha, 800, 1.0, 1e-8, 50)
    np.testing.assert_allclose(a[0], b[0], rtol=1e-9, atol=1e-9)
    assert a[1] == b[1] and a[2] == b[2]


def test_fallback_subgradient_descends():
    rng = np.random.default_rng(2)
    Z = np.column_stack([np.ones(400), rng.normal(size=400)])
    y = 2 * Z[:, 1] + rng.normal(size=400)
    theta, n_iter, _ = _fallback.subgradient_pinball(Z, y, 0.5, 2000, 1.0, 1e-8, 50)
    assert abs(theta[1] - 2) < 0.15 and 1 <= n_iter <= 2000
