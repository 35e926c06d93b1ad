"""Pure numpy mesh kernel; same contract as the compiled one.

The mesh is ``H[i, j]`` over log-radius rows ``i`` and periodic angle
columns ``j``.  A cell ``(i, j)`` has corners ``(i, j), (i+1, j), (i, j+1),
(i+1, j+1)`` with column ``j+1`` taken mod ``n_t``.
"""

import numpy as np


def cell_moduli(H):
    """Mean corner modulus of every cell, shape ``(n_r - 1, n_t)``."""
    A = np.abs(H)
    A1 = np.roll(A, -1, axis=1)
    return 0.25 * (A[:-1] + A[1:] + A1[:-1] + A1[1:])


def assemble(H, w, dw, cx, ct):
    """Energy ``sum w (cx(|a|^2+|b|^2) + ct(|c|^2+|d|^2))`` and its gradient.

    ``a, b`` are the radial edge differences of a cell, ``c, d`` the angular
    ones; ``w`` and ``dw`` are the cell weight and its derivative in the mean
    modulus.  The gradient is ``dE/dRe + i dE/dIm`` at every node.
    """
    H = np.asarray(H, dtype=complex)
    H1 = np.roll(H, -1, axis=1)
    a = H[1:] - H[:-1]
    b = H1[1:] - H1[:-1]
    ct_diff = H1 - H
    c = ct_diff[:-1]
    d = ct_diff[1:]
    D = cx * (np.abs(a) ** 2 + np.abs(b) ** 2) + ct * (np.abs(c) ** 2 + np.abs(d) ** 2)
    E = float(np.sum(w * D))

    ga = 2.0 * w * cx * a
    gb = 2.0 * w * cx * b
    gc = 2.0 * w * ct * c
    gd = 2.0 * w * ct * d
    A = np.abs(H)
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(A > 0, H / A, 0.0)
    wd = 0.25 * D * dw

    # corner (i, j), (i+1, j), (i, j+1), (i+1, j+1) contributions of each cell
    g00 = -ga - gc + wd * unit[:-1]
    g10 = ga - gd + wd * unit[1:]
    g01 = -gb + gc + wd * np.roll(unit, -1, axis=1)[:-1]
    g11 = gb + gd + wd * np.roll(unit, -1, axis=1)[1:]

    G = np.zeros_like(H)
    G[:-1] += g00
    G[1:] += g10
    G[:-1] += np.roll(g01, 1, axis=1)
    G[1:] += np.roll(g11, 1, axis=1)
    return E, G
