import math
import os
import subprocess
import sys

import numpy as np
import pytest

from annuli import _pykernel, kernel

try:
    from annuli import _ckernel
except ImportError:  # pragma: no cover - the extension is optional
    _ckernel = None

needs_c = pytest.mark.skipif(_ckernel is None, reason="compiled kernel not built")


def _mesh(seed, n_r=9, n_t=12):
    rng = np.random.default_rng(seed)
    # moduli stay well inside the unit disk, where the weight below is smooth
    s = np.linspace(0.4, 0.8, n_r)[:, None]
    t = 2 * math.pi * np.arange(n_t)[None, :] / n_t
    H = s * np.exp(1j * t) * (1 + 0.05 * (rng.standard_normal((n_r, n_t)) + 1j * rng.standard_normal((n_r, n_t))))
    return np.ascontiguousarray(H)


def _weights(M):
    rho = 2 / (1 - M**2)
    return np.ascontiguousarray(rho**2), np.ascontiguousarray(2 * rho * 4 * M / (1 - M**2) ** 2)


def _energy(impl, H, cx=0.7, ct=1.3):
    w, dw = _weights(impl.cell_moduli(H))
    return impl.assemble(H, w, dw, cx, ct)


def test_gradient_matches_differences():
    H = _mesh(0)
    E, G = _energy(_pykernel, H)
    rng = np.random.default_rng(1)
    for _ in range(10):
        i, j = rng.integers(0, H.shape[0]), rng.integers(0, H.shape[1])
        for unit, part in ((1.0, G.real), (1j, G.imag)):
            Hp, Hm = H.copy(), H.copy()
            Hp[i, j] += 1e-6 * unit
            Hm[i, j] -= 1e-6 * unit
            fd = (_energy(_pykernel, Hp)[0] - _energy(_pykernel, Hm)[0]) / 2e-6
            assert part[i, j] == pytest.approx(fd, rel=1e-6, abs=1e-8)


def test_energy_of_identity_is_positive_and_rotation_invariant():
    s = np.linspace(0.5, 1.0, 9)[:, None]
    t = 2 * math.pi * np.arange(12)[None, :] / 12
    H = np.ascontiguousarray(s * np.exp(1j * t))
    E0, _ = _energy(_pykernel, H)
    E1, _ = _energy(_pykernel, np.ascontiguousarray(H * np.exp(0.4j)))
    assert E0 > 0 and E1 == pytest.approx(E0, rel=1e-14)


@needs_c
@pytest.mark.parametrize("seed", range(4))
def test_backends_agree(seed):
    H = _mesh(seed, 17, 24)
    np.testing.assert_allclose(_ckernel.cell_moduli(H), _pykernel.cell_moduli(H), rtol=1e-14)
    Ec, Gc = _energy(_ckernel, H)
    Ep, Gp = _energy(_pykernel, H)
    assert Ec == pytest.approx(Ep, rel=1e-12)
    np.testing.assert_allclose(Gc, Gp, rtol=1e-11, atol=1e-12)


def test_backend_selection_by_environment():
    env = dict(os.environ, ANNULI_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from annuli import kernel; print(kernel.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "python"
    assert kernel.BACKEND in ("cython", "python")
