"""NumPy reference implementation of the stencil kernels.

Contract shared with the compiled backend:

``flux_arrays_1d(wpad, h, p, eps2)``
    wpad: padded cell values, shape (n+2,) with one ghost per side.
    Returns (div, D, G, M2) where, for faces f = 0..n,
        G[f]  = (wpad[f+1] - wpad[f]) / h          face gradient
        M2[f] = G[f]^2 + eps2                       regularized modulus^2
        D[f]  = M2[f]^((p-2)/2)                     face diffusivity
    and for cells i = 0..n-1,
        div[i] = (D[i+1] G[i+1] - D[i] G[i]) / h    flux divergence.

``flux_arrays_2d(wpad, h, p, eps2)``
    wpad: shape (n0+2, n1+2) with ghosts on every side (corners filled).
    Returns (div, Dx, Gx, M2x, Dy, Gy, M2y); x-faces have shape
    (n0+1, n1), y-faces (n0, n1+1). The squared modulus at a face adds the
    transverse derivative averaged from the four neighboring differences.
"""

import numpy as np


def flux_arrays_1d(wpad, h, p, eps2):
    G = np.diff(wpad) / h
    M2 = G * G + eps2
    D = M2 ** (0.5 * (p - 2.0))
    F = D * G
    div = np.diff(F) / h
    return div, D, G, M2


def flux_arrays_2d(wpad, h, p, eps2):
    inner = wpad[1:-1, 1:-1]
    n0, n1 = inner.shape

    # x-faces: between cells (i-1, j) and (i, j) for i = 0..n0
    Gx = (wpad[1:, 1:-1] - wpad[:-1, 1:-1]) / h
    # transverse dw/dy at an x-face: mean of the centered differences of the
    # two adjacent cells
    Tx = (wpad[:-1, 2:] - wpad[:-1, :-2] + wpad[1:, 2:] - wpad[1:, :-2]) / (4.0 * h)
    M2x = Gx * Gx + Tx * Tx + eps2
    Dx = M2x ** (0.5 * (p - 2.0))
    Fx = Dx * Gx

    # y-faces
    Gy = (wpad[1:-1, 1:] - wpad[1:-1, :-1]) / h
    Ty = (wpad[2:, :-1] - wpad[:-2, :-1] + wpad[2:, 1:] - wpad[:-2, 1:]) / (4.0 * h)
    M2y = Gy * Gy + Ty * Ty + eps2
    Dy = M2y ** (0.5 * (p - 2.0))
    Fy = Dy * Gy

    div = (Fx[1:, :] - Fx[:-1, :]) / h + (Fy[:, 1:] - Fy[:, :-1]) / h
    assert div.shape == (n0, n1)
    return div, Dx, Gx, M2x, Dy, Gy, M2y
