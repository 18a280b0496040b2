import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pacbayes_da import _pykernels, kernels

try:
    from pacbayes_da import _ckernels
except ImportError:  # extension not built
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")


def _case(seed, n, npts):
    rng = np.random.default_rng(seed)
    table = rng.choice(np.array([-1, 1], dtype=np.int8), size=(n, npts))
    mass = rng.dirichlet(np.ones(2 * npts)).reshape(npts, 2)
    return table, mass


@needs_ext
@given(st.integers(0, 10**6), st.integers(1, 12), st.integers(1, 40))
def test_compiled_and_numpy_agree(seed, n, npts):
    table, mass = _case(seed, n, npts)
    pos, neg, marg = mass[:, 1].copy(), mass[:, 0].copy(), mass.sum(axis=1)
    np.testing.assert_allclose(_ckernels.voter_risks(table, pos, neg), _pykernels.voter_risks(table, pos, neg), atol=1e-14)
    np.testing.assert_allclose(_ckernels.disagreement_matrix(table, marg), _pykernels.disagreement_matrix(table, marg), atol=1e-14)
    np.testing.assert_allclose(
        _ckernels.joint_error_matrix(table, pos, neg), _pykernels.joint_error_matrix(table, pos, neg), atol=1e-14
    )
    rho = np.random.default_rng(seed + 1).dirichlet(np.ones(n))
    m = _pykernels.disagreement_matrix(table, marg)
    assert _ckernels.quadratic_form(m, rho, rho) == pytest.approx(_pykernels.quadratic_form(m, rho, rho), abs=1e-14)


@pytest.mark.parametrize("impl", [_pykernels] + ([_ckernels] if _ckernels else []), ids=lambda m: m.__name__)
def test_kernel_structure(impl):
    table, mass = _case(5, 7, 30)
    pos, neg = mass[:, 1].copy(), mass[:, 0].copy()
    m = np.asarray(impl.disagreement_matrix(table, pos + neg))
    e = np.asarray(impl.joint_error_matrix(table, pos, neg))
    np.testing.assert_array_equal(m, m.T)
    np.testing.assert_array_equal(np.diag(m), 0)
    np.testing.assert_array_equal(e, e.T)
    np.testing.assert_array_equal(np.diag(e), np.asarray(impl.voter_risks(table, pos, neg)))


def test_dispatch_uses_numpy_for_large_tables(monkeypatch):
    calls = []

    class Spy:
        def __getattr__(self, name):
            calls.append(name)
            return getattr(_pykernels, name)

    monkeypatch.setattr(kernels, "_pykernels", Spy())
    table, mass = _case(0, 60, 10)  # 36,000 pair-ops > cutoff
    kernels.disagreement_matrix(table, mass.sum(axis=1))
    assert calls == ["disagreement_matrix"]


def test_pure_env_forces_numpy_backend():
    env = dict(os.environ, PACBAYES_DA_PURE="1")
    out = subprocess.run(
        [sys.executable, "-c", "import pacbayes_da; print(pacbayes_da.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


@needs_ext
def test_backend_reports_compiled():
    assert kernels.BACKEND == "cython"
