"""Orthonormal 2D discrete Fourier transform on two-channel complex images.

Both directions carry a 1/sqrt(H*W) factor, so the transform is unitary:
energy is preserved and the inverse is the conjugate transform with the same
normalization. The DC coefficient sits at index (0, 0); any centered-frequency
logic belongs to the sampling masks, not to the transform.

Power-of-two axis lengths go through an iterative radix-2 kernel vectorized
over the other axis; other lengths fall back to a dense DFT matrix multiply.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .tensorcore import ComplexImage


class KSpace(ComplexImage):
    """Spatial-frequency counterpart of ComplexImage, same [2, H, W] layout.

    Index (0, 0) is the DC component; no implicit fftshift is applied.
    """


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@lru_cache(maxsize=None)
def _bit_reverse_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    x = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for _ in range(bits):
        rev = (rev << 1) | (x & 1)
        x >>= 1
    rev.setflags(write=False)
    return rev


@lru_cache(maxsize=None)
def _twiddles(size: int, sign: int) -> np.ndarray:
    half = size // 2
    tw = np.exp(sign * 2j * np.pi * np.arange(half) / size)
    tw.setflags(write=False)
    return tw


@lru_cache(maxsize=None)
def _dft_matrix(n: int, sign: int) -> np.ndarray:
    j = np.arange(n)
    m = np.exp(sign * 2j * np.pi * np.outer(j, j) / n)
    m.setflags(write=False)
    return m


def _transform_rows(a: np.ndarray, sign: int) -> np.ndarray:
    """Unnormalized DFT along the last axis of a complex128 array."""
    n = a.shape[-1]
    if not _is_pow2(n):
        return a @ _dft_matrix(n, sign)
    out = np.ascontiguousarray(a[..., _bit_reverse_indices(n)], dtype=np.complex128)
    size = 2
    while size <= n:
        half = size // 2
        tw = _twiddles(size, sign)
        v = out.reshape(out.shape[:-1] + (n // size, size))
        even = v[..., :half].copy()
        odd = v[..., half:] * tw
        v[..., :half] = even + odd
        v[..., half:] = even - odd
        size *= 2
    return out


def _fft2_raw(z: np.ndarray, sign: int) -> np.ndarray:
    z = _transform_rows(z, sign)
    z = _transform_rows(z.swapaxes(-1, -2), sign).swapaxes(-1, -2)
    return z


def fft2_complex(z: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Orthonormal 2D DFT of an H x W complex array (complex128 arithmetic)."""
    h, w = z.shape[-2], z.shape[-1]
    sign = 1 if inverse else -1
    return _fft2_raw(z.astype(np.complex128, copy=False), sign) / math.sqrt(h * w)


def fft2(img: ComplexImage) -> KSpace:
    """Orthonormal forward 2D DFT: k(u,v) = (HW)^-1/2 sum x(i,j) e^{-2pi i(ui/H+vj/W)}."""
    return KSpace.from_complex(fft2_complex(img.to_complex()), dtype=img.dtype)


def ifft2(k: ComplexImage) -> ComplexImage:
    """Inverse of :func:`fft2` up to floating-point roundoff."""
    return ComplexImage.from_complex(fft2_complex(k.to_complex(), inverse=True), dtype=k.dtype)
