"""The compiled and numpy kernel backends must agree."""

import numpy as np
import pytest

from tmwave import fem1d, kernels
from tmwave import _kernels_py

from conftest import random_spd_banded

BACKENDS = kernels.backends()
needs_compiled = pytest.mark.skipif("compiled" not in BACKENDS,
                                    reason="extension not built")


def test_selected_backend_is_listed():
    assert kernels.BACKEND in BACKENDS


@needs_compiled
def test_matvec_equivalent(rng):
    _, b = random_spd_banded(rng, 300)
    x = rng.standard_normal(300)
    got = [BACKENDS[k].band_matvec(np.ascontiguousarray(b.bands), x) for k in BACKENDS]
    assert np.allclose(got[0], got[1], rtol=1e-15, atol=1e-14)


@needs_compiled
def test_ldlt_equivalent(rng):
    _, b = random_spd_banded(rng, 200)
    rhs = rng.standard_normal(200)
    outs = []
    for k in BACKENDS:
        lb, d, bad = BACKENDS[k].band_ldlt(np.ascontiguousarray(b.bands), 1e-14)
        assert bad == -1
        outs.append((lb, d, BACKENDS[k].band_ldlt_solve(lb, d, rhs)))
    for a, c in zip(outs[0], outs[1]):
        assert np.allclose(a, c, rtol=1e-13, atol=1e-14)


@needs_compiled
def test_ldlt_reports_same_bad_row():
    bands = np.array([[1.0, 1.0, 5.0], [0.0, 1.0, 1.0]])
    rows = [BACKENDS[k].band_ldlt(bands, 1e-12)[2] for k in BACKENDS]
    assert rows == [1, 1]


@needs_compiled
def test_assembly_equivalent(rng):
    mesh = fem1d.build_mesh(0.0, 1.0, 37)
    sp = fem1d.FeSpace(mesh)
    wq = rng.uniform(0.5, 2.0, sp.quad_points.shape) * mesh.lengths[:, None]
    for table in (fem1d.MASS_TABLE, fem1d.STIFF_TABLE):
        got = [BACKENDS[k].assemble_p2_bands(np.ascontiguousarray(wq),
                                                np.ascontiguousarray(table)) for k in BACKENDS]
        assert np.allclose(got[0], got[1], rtol=1e-14, atol=1e-15)
    elem = fem1d.mass_element_matrices(sp, rng.uniform(0.5, 2.0, sp.quad_points.shape))
    got = [BACKENDS[k].scatter_bands(np.ascontiguousarray(elem), sp.dofmap.astype(np.int64),
                                     sp.n_dofs, 2) for k in BACKENDS]
    assert np.allclose(got[0], got[1], rtol=1e-14, atol=1e-15)
    wn = rng.uniform(0.5, 2.0, (mesh.n_elements, 3))
    got = [BACKENDS[k].lumped_p2_diagonal(wn, np.ascontiguousarray(mesh.lengths),
                                          fem1d.LOBATTO_WEIGHTS) for k in BACKENDS]
    assert np.allclose(got[0], got[1], rtol=1e-15)


def test_python_backend_matches_dense(rng):
    a, b = random_spd_banded(rng, 25)
    x = rng.standard_normal(25)
    assert np.allclose(_kernels_py.band_matvec(np.array(b.bands), x), a @ x)


def test_force_python_backend_via_env():
    import subprocess
    import sys
    out = subprocess.run([sys.executable, "-c", "import tmwave.kernels as k; print(k.BACKEND)"],
                         env={"TMWAVE_PURE_PYTHON": "1", "PATH": "/usr/bin:/bin"},
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
