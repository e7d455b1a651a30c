"""Independent brute-force oracles used by the tests.

These deliberately avoid the library's vectorized code paths (and numpy.fft):
plain loops implementing the defining formulas, so agreement is meaningful.
"""

import cmath

import numpy as np


def naive_dft2(z: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Orthonormal 2D DFT by direct evaluation of the defining sum."""
    h, w = z.shape
    sign = 2j if inverse else -2j
    out = np.zeros((h, w), dtype=complex)
    for u in range(h):
        for v in range(w):
            acc = 0j
            for i in range(h):
                for j in range(w):
                    acc += z[i, j] * cmath.exp(sign * cmath.pi * (u * i / h + v * j / w))
            out[u, v] = acc
    return out / np.sqrt(h * w)


def naive_conv2d(weights: np.ndarray, bias: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Same-padded stride-1 cross-correlation, quadruple loop."""
    n_out, n_in, k, _ = weights.shape
    _, h, w = x.shape
    p = (k - 1) // 2
    out = np.zeros((n_out, h, w), dtype=x.dtype)
    for o in range(n_out):
        for i in range(h):
            for j in range(w):
                acc = 0.0
                for c in range(n_in):
                    for di in range(k):
                        for dj in range(k):
                            ii, jj = i + di - p, j + dj - p
                            if 0 <= ii < h and 0 <= jj < w:
                                acc += weights[o, c, di, dj] * x[c, ii, jj]
                out[o, i, j] = acc + bias[o]
    return out


def dct2_8x8_coefficients(image: np.ndarray) -> np.ndarray:
    """Type-II DCT coefficients of every disjoint 8x8 block, flattened."""
    n = 8
    c = np.zeros((n, n))
    for u in range(n):
        for i in range(n):
            c[u, i] = np.cos(np.pi * (2 * i + 1) * u / (2 * n))
    h, w = image.shape
    coeffs = []
    for bi in range(0, h - n + 1, n):
        for bj in range(0, w - n + 1, n):
            block = image[bi : bi + n, bj : bj + n]
            coeffs.append((c @ block @ c.T).ravel())
    return np.concatenate(coeffs)
