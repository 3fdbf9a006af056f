"""Numeric hot loops of the benchmarks: escape counts, trial division, FNV-1a.

Each kernel exists twice: a numba ``@njit`` version and a pure-numpy one.
The module-level names point at the numba versions unless numba is missing
or ``CAFX_PURE_NUMPY=1`` is set. Both produce bit-identical results; the
``kernels`` benchmark compares their speed.
"""
from __future__ import annotations

import os

import numpy as np

DEFAULT_AREA = (-1.5, -1.0, 0.5, 1.0)  # re_min, im_min, re_max, im_max

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def _want_numba() -> bool:
    if os.environ.get("CAFX_PURE_NUMPY", "").strip().lower() in ("1", "true", "yes"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


USE_NUMBA = _want_numba()


# -- pure numpy ----------------------------------------------------------------
def escape_count_numpy(c_re: float, c_im: float, max_iter: int) -> int:
    row = _escape_numpy(np.array([c_re]), c_im, max_iter)
    return int(row[0])


def _escape_numpy(cr: np.ndarray, ci: float, max_iter: int) -> np.ndarray:
    zr = np.zeros_like(cr)
    zi = np.zeros_like(cr)
    out = np.full(cr.shape, max_iter, dtype=np.uint32)
    live = np.ones(cr.shape, dtype=bool)
    for i in range(1, max_iter + 1):
        nzr = zr * zr - zi * zi + cr
        nzi = 2.0 * zr * zi + ci
        zr = np.where(live, nzr, zr)
        zi = np.where(live, nzi, zi)
        escaped = live & (zr * zr + zi * zi > 4.0)
        out[escaped] = i
        live &= ~escaped
        if not live.any():
            break
    return out


def mandelbrot_row_numpy(y: int, n: int, max_iter: int, area=DEFAULT_AREA) -> np.ndarray:
    re0, im0, re1, im1 = area
    cr = re0 + (re1 - re0) * np.arange(n, dtype=np.float64) / n
    ci = im0 + (im1 - im0) * y / n
    return _escape_numpy(cr, ci, max_iter)


def factorize_numpy(n: int, chunk: int = 1 << 20) -> list[int]:
    """Trial division, testing ``chunk`` odd candidates per vector step."""
    if n < 2:
        raise ValueError("factorize needs n >= 2")
    out = []
    while n % 2 == 0:
        out.append(2)
        n //= 2
    d = 3
    while d * d <= n:
        hi = min(d + 2 * chunk, int(np.sqrt(n)) + 2)
        cand = np.arange(d, hi, 2, dtype=np.uint64)
        hits = cand[np.uint64(n) % cand == 0]
        if hits.size == 0:
            d = int(cand[-1]) + 2
            continue
        p = int(hits[0])
        while n % p == 0:
            out.append(p)
            n //= p
        d = p + 2
    if n > 1:
        out.append(n)
    return out


def fnv1a64_numpy(data) -> int:
    buf = np.frombuffer(bytes(data), dtype=np.uint8)
    h = FNV_OFFSET
    for b in buf.tolist():
        h = ((h ^ b) * FNV_PRIME) & _MASK64
    return h


# -- numba -----------------------------------------------------------------------
if USE_NUMBA:
    from numba import njit

    @njit(nogil=True, cache=True)
    def _escape_nb(cr, ci, max_iter):
        zr = 0.0
        zi = 0.0
        for i in range(1, max_iter + 1):
            nzr = zr * zr - zi * zi + cr
            zi = 2.0 * zr * zi + ci
            zr = nzr
            if zr * zr + zi * zi > 4.0:
                return i
        return max_iter

    @njit(nogil=True, cache=True)
    def _row_nb(y, n, max_iter, re0, im0, re1, im1):
        out = np.empty(n, dtype=np.uint32)
        ci = im0 + (im1 - im0) * y / n
        for x in range(n):
            cr = re0 + (re1 - re0) * np.float64(x) / n
            out[x] = _escape_nb(cr, ci, max_iter)
        return out

    @njit(nogil=True, cache=True)
    def _factorize_nb(n):
        out = []
        while n % 2 == 0:
            out.append(2)
            n //= 2
        d = 3
        while d * d <= n:
            while n % d == 0:
                out.append(d)
                n //= d
            d += 2
        if n > 1:
            out.append(n)
        return out

    @njit(nogil=True, cache=True)
    def _fnv_nb(buf):
        h = np.uint64(FNV_OFFSET)
        p = np.uint64(FNV_PRIME)
        for b in buf:
            h = (h ^ np.uint64(b)) * p
        return h

    def escape_count_numba(c_re: float, c_im: float, max_iter: int) -> int:
        return int(_escape_nb(float(c_re), float(c_im), int(max_iter)))

    def mandelbrot_row_numba(y: int, n: int, max_iter: int, area=DEFAULT_AREA) -> np.ndarray:
        re0, im0, re1, im1 = (float(a) for a in area)
        return _row_nb(int(y), int(n), int(max_iter), re0, im0, re1, im1)

    def factorize_numba(n: int) -> list[int]:
        if n < 2:
            raise ValueError("factorize needs n >= 2")
        if n >= 1 << 63:
            return factorize_numpy(n)  # beyond int64; the jitted loop would overflow
        return [int(f) for f in _factorize_nb(int(n))]

    def fnv1a64_numba(data) -> int:
        return int(_fnv_nb(np.frombuffer(bytes(data), dtype=np.uint8)))

    escape_count = escape_count_numba
    mandelbrot_row = mandelbrot_row_numba
    factorize = factorize_numba
    fnv1a64 = fnv1a64_numba
else:
    escape_count = escape_count_numpy
    mandelbrot_row = mandelbrot_row_numpy
    factorize = factorize_numpy
    fnv1a64 = fnv1a64_numpy


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


def counts_checksum(counts: np.ndarray) -> int:
    """FNV-1a 64 over row-major counts, each as u32 little-endian."""
    return fnv1a64(np.ascontiguousarray(counts, dtype="<u4").tobytes())


def mandelbrot_oracle(n: int, max_iter: int, area=DEFAULT_AREA) -> int:
    """Sequential reference: every row in order, no actors."""
    rows = np.stack([mandelbrot_row(y, n, max_iter, area) for y in range(n)])
    return counts_checksum(rows)
