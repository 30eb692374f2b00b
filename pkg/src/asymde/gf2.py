"""Bit-packed GF(2) linear algebra.

Rows are packed into uint64 words, least significant bit first: column ``c``
lives in word ``c // 64`` at bit ``c % 64``. Elimination scans pivot columns
left to right and takes the first row with a nonzero entry, so results are
reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

WORD = 64


class CapacityExceeded(RuntimeError):
    """The null space has more elements than the caller allowed."""


def _nwords(cols: int) -> int:
    return (cols + WORD - 1) // WORD


def pack_bits(dense) -> np.ndarray:
    """Pack a 0/1 array of shape (r, c) into uint64 words, shape (r, ceil(c/64))."""
    dense = np.atleast_2d(np.asarray(dense, dtype=np.uint8) & 1)
    r, c = dense.shape
    pad = _nwords(c) * WORD - c
    if pad:
        dense = np.concatenate([dense, np.zeros((r, pad), np.uint8)], axis=1)
    by = np.packbits(dense, axis=1, bitorder="little")
    return np.ascontiguousarray(by).view("<u8").astype(np.uint64, copy=False).reshape(r, -1)


def unpack_bits(packed: np.ndarray, cols: int) -> np.ndarray:
    packed = np.ascontiguousarray(np.atleast_2d(packed).astype("<u8"))
    by = packed.view(np.uint8)
    return np.unpackbits(by, axis=1, bitorder="little", count=cols)


@dataclass(frozen=True, eq=False)
class GF2Matrix:
    rows: int
    cols: int
    bits: np.ndarray

    def __post_init__(self):
        if self.rows <= 0 or self.cols <= 0:
            raise ValueError("GF2Matrix needs positive row and column counts")
        b = np.ascontiguousarray(self.bits, dtype=np.uint64)
        if b.shape != (self.rows, _nwords(self.cols)):
            raise ValueError(f"packed bits have shape {b.shape}")
        tail = self.cols % WORD
        if tail and np.any(b[:, -1] >> np.uint64(tail)):
            raise ValueError("bits set beyond the last column")
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)

    @classmethod
    def from_dense(cls, dense) -> "GF2Matrix":
        dense = np.atleast_2d(np.asarray(dense))
        return cls(dense.shape[0], dense.shape[1], pack_bits(dense))

    @classmethod
    def identity(cls, n: int) -> "GF2Matrix":
        return cls.from_dense(np.eye(n, dtype=np.uint8))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "GF2Matrix":
        return cls(rows, cols, np.zeros((rows, _nwords(cols)), np.uint64))

    def to_dense(self) -> np.ndarray:
        return unpack_bits(self.bits, self.cols)

    def __getitem__(self, rc) -> int:
        r, c = rc
        if not (0 <= r < self.rows and 0 <= c < self.cols):
            raise IndexError(f"({r}, {c}) outside {self.rows}x{self.cols}")
        return int((self.bits[r, c // WORD] >> np.uint64(c % WORD)) & np.uint64(1))

    def __eq__(self, other):
        if not isinstance(other, GF2Matrix):
            return NotImplemented
        return (self.rows, self.cols) == (other.rows, other.cols) and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash((self.rows, self.cols, self.bits.tobytes()))

    def __repr__(self):
        return f"GF2Matrix({self.rows}x{self.cols})"

    def syndrome(self, x) -> np.ndarray:
        """``A x`` over GF(2) for a 0/1 vector or a batch of row vectors."""
        x = np.asarray(x, dtype=np.uint8)
        out = _parity_products(self.bits, pack_bits(np.atleast_2d(x)))
        return out if x.ndim == 2 else out[0]

    def row_weights(self) -> np.ndarray:
        return np.bitwise_count(self.bits).sum(axis=1).astype(np.int64)


@dataclass(frozen=True, eq=False)
class GF2Basis:
    """Null-space basis; ``rows`` is packed like :class:`GF2Matrix`."""

    cols: int
    rows: np.ndarray
    pivots: np.ndarray  # pivot column of each row-echelon row of A
    free: np.ndarray  # free columns; basis row t has a 1 at free[t]

    @property
    def size(self) -> int:
        return int(self.rows.shape[0])

    def to_dense(self) -> np.ndarray:
        if self.size == 0:
            return np.zeros((0, self.cols), np.uint8)
        return unpack_bits(self.rows, self.cols)


@numba.njit(cache=True)
def _parity_products(a, x):
    out = np.zeros((x.shape[0], a.shape[0]), np.uint8)
    for t in range(x.shape[0]):
        for i in range(a.shape[0]):
            acc = np.uint64(0)
            for k in range(a.shape[1]):
                acc ^= a[i, k] & x[t, k]
            # fold the word down to its parity bit
            for sh in (32, 16, 8, 4, 2, 1):
                acc ^= acc >> np.uint64(sh)
            out[t, i] = np.uint8(acc & np.uint64(1))
    return out


@numba.njit(cache=True)
def _rref(b, cols):
    """In-place reduced row echelon form. Returns the pivot column per pivot row."""
    m, nw = b.shape
    piv = np.empty(min(m, cols), np.int64)
    r = 0
    one = np.uint64(1)
    for c in range(cols):
        if r == m:
            break
        w = c // 64
        mask = one << np.uint64(c % 64)
        p = -1
        for i in range(r, m):
            if b[i, w] & mask:
                p = i
                break
        if p < 0:
            continue
        if p != r:
            for k in range(nw):
                t = b[p, k]
                b[p, k] = b[r, k]
                b[r, k] = t
        for i in range(m):
            if i != r and (b[i, w] & mask):
                for k in range(w, nw):
                    b[i, k] ^= b[r, k]
        piv[r] = c
        r += 1
    return piv[:r]


@numba.njit(cache=True)
def _basis_from_rref(b, piv, free, cols):
    nw = b.shape[1]
    k = free.shape[0]
    out = np.zeros((k, nw), np.uint64)
    one = np.uint64(1)
    for t in range(k):
        f = free[t]
        out[t, f // 64] |= one << np.uint64(f % 64)
    for i in range(piv.shape[0]):
        pc = piv[i]
        pw = pc // 64
        pmask = one << np.uint64(pc % 64)
        for t in range(k):
            f = free[t]
            if (b[i, f // 64] >> np.uint64(f % 64)) & one:
                out[t, pw] |= pmask
    return out


def echelon(A: GF2Matrix) -> tuple[np.ndarray, np.ndarray]:
    """Reduced row echelon form of ``A`` and its pivot columns."""
    b = np.array(A.bits, copy=True)
    piv = _rref(b, A.cols)
    return b, piv


def rank(A: GF2Matrix) -> int:
    return int(echelon(A)[1].shape[0])


def null_space_basis(A: GF2Matrix) -> GF2Basis:
    b, piv = echelon(A)
    is_piv = np.zeros(A.cols, bool)
    is_piv[piv] = True
    free = np.flatnonzero(~is_piv).astype(np.int64)
    rows = _basis_from_rref(b, piv, free, A.cols)
    return GF2Basis(A.cols, rows, piv, free)


def enumerate_codewords(A: GF2Matrix, cap: int = 1 << 16) -> np.ndarray:
    """All vectors in the null space of ``A`` as rows of a uint8 array.

    Walks a Gray code over the basis so each new word costs one XOR.
    Raises :class:`CapacityExceeded` when ``2**dim > cap``.
    """
    basis = null_space_basis(A)
    k = basis.size
    if k >= 63 or (1 << k) > cap:
        raise CapacityExceeded(f"null space has 2^{k} elements, cap is {cap}")
    out = np.zeros((1 << k, basis.rows.shape[1] if k else _nwords(A.cols)), np.uint64)
    cur = np.zeros(out.shape[1], np.uint64)
    for t in range(1, 1 << k):
        flip = (t & -t).bit_length() - 1  # lowest set bit of t
        cur = cur ^ basis.rows[flip]
        out[t] = cur
    return unpack_bits(out, A.cols)
