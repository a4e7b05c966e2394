"""The compiled kernels and the numpy fallback must agree."""

import os
import subprocess
import sys

import numpy as np
import pytest

from cfwmmse import kernels
from cfwmmse._ext import kernels_py

from .conftest import random_complex

compiled = pytest.importorskip("cfwmmse._ext.kernels", reason="extension not built")


@pytest.fixture
def batch(rng):
    g = random_complex(rng, (6, 4, 5, 3))
    q = random_complex(rng, (6, 4, 5, 3))
    return g, q


class TestEffectiveGains:
    def test_reference(self, batch):
        g, q = batch
        x = kernels_py.effective_gains(g, q)
        assert x.shape == (6, 5, 5, 4)
        n, k, j, m = 2, 1, 3, 0
        np.testing.assert_allclose(x[n, k, j, m], np.vdot(g[n, m, k], q[n, m, j]))

    def test_compiled_matches_numpy(self, batch):
        g, q = batch
        np.testing.assert_allclose(compiled.effective_gains(g, q), kernels_py.effective_gains(g, q), rtol=1e-13, atol=1e-14)

    def test_dispatch_adds_batch_axis(self, batch):
        g, q = batch
        np.testing.assert_allclose(kernels.effective_gains(g[0], q[0]), kernels_py.effective_gains(g, q)[0])

    def test_dispatch_accepts_non_contiguous(self, batch):
        g, q = batch
        gt = np.asfortranarray(g)
        np.testing.assert_allclose(kernels.effective_gains(gt, q), kernels_py.effective_gains(g, q))


class TestMomentSums:
    def test_reference(self, rng):
        x = random_complex(rng, (7, 3, 3, 2))
        d, b = kernels_py.moment_sums(x)
        np.testing.assert_allclose(d[1, 2], x[:, 2, 2, 1].sum())
        np.testing.assert_allclose(b[0, 2, 1, 0], np.sum((x[:, 0, 2, 1] * x[:, 0, 2, 0].conj()).real))

    def test_compiled_matches_numpy(self, rng):
        x = random_complex(rng, (9, 4, 4, 3))
        for a, b in zip(compiled.moment_sums(x), kernels_py.moment_sums(x)):
            np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)

    def test_B_symmetric_in_ap_pair(self, rng):
        x = random_complex(rng, (5, 3, 3, 4))
        _, b = kernels.moment_sums(x)
        np.testing.assert_allclose(b, np.swapaxes(b, -1, -2))


def test_env_forces_fallback():
    env = dict(os.environ, CFWMMSE_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "import cfwmmse; print(cfwmmse.BACKEND)"], env=env, capture_output=True, text=True, check=True
    )
    assert out.stdout.strip() == "numpy"


def test_backend_reports_compiled():
    assert kernels.BACKEND == ("numpy" if os.environ.get("CFWMMSE_PURE_PYTHON") not in (None, "", "0") else "cython")
