"""Hadamard matrices of every order up to 32 and the BPSK codebook they generate.

Powers of two come from the Sylvester doubling; orders 12, 20, 24 and 28 from
the Paley type-I construction over GF(11), GF(19), GF(23) and GF(27).  All
arithmetic here is integer; floats only appear in :func:`rescaled`.
"""

from __future__ import annotations

import functools
import io
import os
from dataclasses import dataclass, field
from typing import IO, Iterator, Union

import numpy as np

SUPPORTED_ORDERS = (1, 2, 4, 8, 12, 16, 20, 24, 28, 32)

# Paley type-I field orders for the non power-of-two lengths.
_PALEY_FOR_ORDER = {12: 11, 20: 19, 24: 23, 28: 27}


@dataclass(frozen=True)
class HadamardMatrix:
    order: int
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        entries = np.array(self.entries, dtype=np.int64)
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        if not validate(entries) or entries.shape[0] != self.order:
            raise ValueError(f"not a Hadamard matrix of order {self.order}")

    def rescaled(self) -> np.ndarray:
        """The orthogonal matrix H / sqrt(L)."""
        return self.entries / np.sqrt(self.order)

    def codewords(self, extended: bool = False) -> list["Codeword"]:
        """Rows as BPSK sign sequences, optionally followed by the all-minus word."""
        words = [Codeword(self.entries[k], k) for k in range(self.order)]
        if extended:
            if not np.all(self.entries[0] == 1):
                raise ValueError("extended codebook needs an all-plus row 0")
            words.append(Codeword(-self.entries[0], 0, extended=True))
        return words


@dataclass(frozen=True)
class Codeword:
    signs: np.ndarray = field(repr=False)
    index: int
    extended: bool = False

    def __post_init__(self):
        signs = np.array(self.signs, dtype=np.int64)
        signs.setflags(write=False)
        object.__setattr__(self, "signs", signs)
        if not np.all(np.abs(signs) == 1):
            raise ValueError("codeword entries must be +1 or -1")
        if self.extended and not np.all(signs == -1):
            raise ValueError("only the all-minus word may be extended")

    @property
    def length(self) -> int:
        return len(self.signs)


def validate(M) -> bool:
    """True iff ``M`` is a square +-1 matrix with ``M @ M.T == L * I``."""
    try:
        M = np.asarray(M)
    except Exception:
        return False
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        return False
    if not np.issubdtype(M.dtype, np.number) or np.iscomplexobj(M):
        return False
    if not np.all((M == 1) | (M == -1)):
        return False
    L = M.shape[0]
    if L > 2 and L % 4:
        return False
    Mi = M.astype(np.int64)
    return bool(np.array_equal(Mi @ Mi.T, L * np.eye(L, dtype=np.int64)))


def sylvester(k: int) -> HadamardMatrix:
    if not 0 <= k <= 5:
        raise ValueError(f"Sylvester exponent must be in 0..5, got {k}")
    H = np.ones((1, 1), dtype=np.int64)
    for _ in range(k):
        H = np.block([[H, H], [H, -H]])
    return HadamardMatrix(1 << k, H)


# --- finite fields ---------------------------------------------------------

class _PrimeField:
    def __init__(self, p: int):
        self.order = p
        self.p = p

    def elements(self) -> range:
        return range(self.p)

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.p

    def mul(self, a: int, b: int) -> int:
        return (a * b) % self.p


class _GF27:
    """GF(3)[x] / (x^3 + 2x + 1); elements are base-3 integers c0 + 3 c1 + 9 c2."""

    order = 27
    p = 3

    @staticmethod
    def _digits(a: int) -> list[int]:
        return [a % 3, (a // 3) % 3, a // 9]

    @staticmethod
    def _pack(c) -> int:
        return c[0] + 3 * c[1] + 9 * c[2]

    def elements(self) -> range:
        return range(27)

    def sub(self, a: int, b: int) -> int:
        da, db = self._digits(a), self._digits(b)
        return self._pack([(x - y) % 3 for x, y in zip(da, db)])

    def mul(self, a: int, b: int) -> int:
        da, db = self._digits(a), self._digits(b)
        prod = [0] * 5
        for i, x in enumerate(da):
            for j, y in enumerate(db):
                prod[i + j] += x * y
        # x^3 = x + 2, x^4 = x^2 + 2x
        for deg in (4, 3):
            c = prod[deg]
            prod[deg] = 0
            prod[deg - 3] += 2 * c
            prod[deg - 2] += c
        return self._pack([c % 3 for c in prod[:3]])


def _is_prime(n: int) -> bool:
    return n >= 2 and all(n % d for d in range(2, int(n**0.5) + 1))


def _field(q: int):
    if _is_prime(q):
        return _PrimeField(q)
    if q == 27:
        return _GF27()
    raise ValueError(f"unsupported field order {q}")


def _quadratic_character(F) -> dict[int, int]:
    squares = {F.mul(a, a) for a in F.elements() if a}
    return {a: (0 if a == 0 else 1 if a in squares else -1) for a in F.elements()}


def paley(q: int) -> HadamardMatrix:
    """Paley type-I Hadamard matrix of order q + 1, for q = 3 (mod 4)."""
    if q % 4 != 3 or q > 31:
        raise ValueError(f"Paley type I needs q = 3 mod 4 and q <= 31, got {q}")
    F = _field(q)
    chi = _quadratic_character(F)
    elems = list(F.elements())
    Q = np.array([[chi[F.sub(a, b)] for b in elems] for a in elems], dtype=np.int64)
    S = np.zeros((q + 1, q + 1), dtype=np.int64)
    S[0, 1:] = 1
    S[1:, 0] = -1
    S[1:, 1:] = Q
    return HadamardMatrix(q + 1, np.eye(q + 1, dtype=np.int64) + S)


def normalize(H: HadamardMatrix) -> HadamardMatrix:
    """Negate columns, then rows, so that row 0 and column 0 are all +1."""
    M = H.entries * H.entries[0][np.newaxis, :]
    M = M * M[:, 0][:, np.newaxis]
    return HadamardMatrix(H.order, M)


@functools.lru_cache(maxsize=None)
def construct(L: int) -> HadamardMatrix:
    """Normalized Hadamard matrix of a supported order."""
    if L not in SUPPORTED_ORDERS:
        raise ValueError(f"no supported Hadamard matrix of order {L}; choose from {SUPPORTED_ORDERS}")
    if L in _PALEY_FOR_ORDER:
        return normalize(paley(_PALEY_FOR_ORDER[L]))
    return normalize(sylvester(L.bit_length() - 1))


# --- text I/O --------------------------------------------------------------

PathOrFile = Union[str, os.PathLike, IO[str]]


def _open(target: PathOrFile, mode: str):
    if isinstance(target, (str, os.PathLike)):
        return open(target, mode)
    return _NoClose(target)


class _NoClose:
    def __init__(self, f):
        self.f = f

    def __enter__(self):
        return self.f

    def __exit__(self, *exc):
        return False


def dumps(H: HadamardMatrix) -> str:
    lines = [str(H.order)]
    lines += [" ".join(f"{v:+d}" for v in row) for row in H.entries]
    return "\n".join(lines) + "\n"


def write_matrix(H: HadamardMatrix, target: PathOrFile) -> None:
    with _open(target, "w") as f:
        f.write(dumps(H))


def _tokens(lines: Iterator[str]):
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if line:
            yield lineno, line


def read_matrix(source: PathOrFile) -> HadamardMatrix:
    """Parse the plain-text matrix format and reject anything that fails :func:`validate`."""
    with _open(source, "r") as f:
        lines = list(_tokens(iter(f.read().splitlines())))
    if not lines:
        raise ValueError("empty matrix file")
    lineno, head = lines[0]
    try:
        L = int(head)
    except ValueError:
        raise ValueError(f"line {lineno}: expected the order L, got {head!r}") from None
    rows = lines[1:]
    if len(rows) != L:
        raise ValueError(f"expected {L} rows, found {len(rows)}")
    entries = []
    for lineno, line in rows:
        parts = line.split()
        if len(parts) != L or any(p not in ("+1", "-1", "1") for p in parts):
            raise ValueError(f"line {lineno}: need {L} entries from {{+1, -1, 1}}")
        entries.append([int(p) for p in parts])
    if not validate(entries):
        raise ValueError("matrix rows are not mutually orthogonal")
    return HadamardMatrix(L, entries)


def loads(text: str) -> HadamardMatrix:
    return read_matrix(io.StringIO(text))
