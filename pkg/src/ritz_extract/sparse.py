"""Sparse square operators in CSR form and Matrix Market exchange I/O."""
from __future__ import annotations

import gzip
import io
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import (BadBanner, BadDimensions, DimensionMismatch, DuplicateEntry,
                     IndexOutOfRange, NonSquare, TooLarge, UnsupportedField)

MAX_DENSE = 512

FORMATS = ("coordinate", "array")
FIELDS = ("real", "complex", "integer", "pattern")
SYMMETRIES = ("general", "symmetric", "skew-symmetric", "hermitian")


@dataclass(frozen=True)
class MatrixMarketHeader:
    object: str
    format: str
    field: str
    symmetry: str


@dataclass(frozen=True, eq=False)
class CsrMatrix:
    """Immutable complex square matrix in compressed-row storage.

    Column indices are strictly increasing within each row.  Products go
    through ``scipy.sparse``, whose CSR kernel sums each row in stored
    (ascending column) order.
    """
    n: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    _op: sp.csr_matrix = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ro = np.asarray(self.row_offsets, dtype=np.int64)
        ci = np.asarray(self.col_indices, dtype=np.int64)
        vals = np.asarray(self.values, dtype=np.complex128)
        if ro.shape != (self.n + 1,) or ro[0] != 0 or ro[-1] != len(ci) or len(ci) != len(vals):
            raise BadDimensions("inconsistent CSR arrays")
        if np.any(np.diff(ro) < 0):
            raise BadDimensions("row offsets must be nondecreasing")
        if len(ci) and (ci.min() < 0 or ci.max() >= self.n):
            raise IndexOutOfRange("column index outside [0, n)")
        if len(ci) > 1:
            bad = np.diff(ci) <= 0
            starts = ro[1:-1]
            starts = starts[(starts > 0) & (starts < len(ci))]
            bad[starts - 1] = False  # pairs straddling a row boundary
            if np.any(bad):
                raise ValueError("column indices not strictly increasing within a row")
        for name, arr in (("row_offsets", ro), ("col_indices", ci), ("values", vals)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        op = sp.csr_matrix((vals, ci, ro), shape=(self.n, self.n))
        object.__setattr__(self, "_op", op)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @property
    def nnz(self) -> int:
        return len(self.values)

    @cached_property
    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def __matmul__(self, x):
        if isinstance(x, np.ndarray) and x.ndim == 2:
            return shifted_block_apply(self, 0.0, x)
        return matvec(self, x)

    @classmethod
    def from_coo(cls, n: int, rows, cols, vals) -> "CsrMatrix":
        """Build from 0-based triplets, summing duplicates."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.complex128)
        if len(rows) and (rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= n):
            raise IndexOutOfRange("triplet index outside [0, n)")
        m = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        m.sum_duplicates()
        m.sort_indices()
        return cls(n, m.indptr, m.indices, m.data)

    @classmethod
    def from_dense(cls, D) -> "CsrMatrix":
        D = np.asarray(D, dtype=np.complex128)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise NonSquare(f"shape {D.shape} is not square")
        r, c = np.nonzero(D)
        return cls.from_coo(D.shape[0], r, c, D[r, c])

    @classmethod
    def identity(cls, n: int) -> "CsrMatrix":
        idx = np.arange(n)
        return cls(n, np.arange(n + 1), idx, np.ones(n))

    @classmethod
    def diag(cls, d) -> "CsrMatrix":
        d = np.asarray(d, dtype=np.complex128)
        n = len(d)
        return cls(n, np.arange(n + 1), np.arange(n), d)

    def triplets(self):
        """0-based ``(rows, cols, values)`` in row-major order."""
        rows = np.repeat(np.arange(self.n), np.diff(self.row_offsets))
        return rows, self.col_indices.copy(), self.values.copy()


def matvec(A: CsrMatrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.complex128)
    if x.shape != (A.n,):
        raise DimensionMismatch(f"vector of length {x.shape} for order {A.n}")
    return A._op @ x


def shifted_block_apply(A: CsrMatrix, theta: complex, V) -> np.ndarray:
    """Columns ``A v_j - theta v_j`` of ``(A - theta I) V``."""
    V = np.asarray(V, dtype=np.complex128)
    if V.ndim != 2 or V.shape[0] != A.n:
        raise DimensionMismatch(f"block of shape {V.shape} for order {A.n}")
    out = A._op @ V
    if theta != 0:
        out = out - theta * V
    return np.asarray(out)


def to_dense(A: CsrMatrix) -> np.ndarray:
    if A.n > MAX_DENSE:
        raise TooLarge(f"order {A.n} exceeds dense guard {MAX_DENSE}")
    return A._op.toarray()


# --------------------------------------------------------------------------
# Matrix Market

def _parse_header(line: str) -> MatrixMarketHeader:
    toks = line.split()
    if not toks or toks[0] != "%%MatrixMarket":
        raise BadBanner(f"banner must begin with %%MatrixMarket, got {line[:40]!r}")
    if len(toks) != 5:
        raise BadBanner(f"banner needs 5 tokens, got {len(toks)}")
    obj, fmt, fld, sym = (t.lower() for t in toks[1:])
    if obj != "matrix":
        raise UnsupportedField(f"object {obj!r} is not supported")
    if fmt not in FORMATS:
        raise UnsupportedField(f"format {fmt!r} is not supported")
    if fld not in FIELDS:
        raise UnsupportedField(f"field {fld!r} is not supported")
    if sym not in SYMMETRIES:
        raise UnsupportedField(f"symmetry {sym!r} is not supported")
    if sym == "hermitian" and fld != "complex":
        raise UnsupportedField("hermitian symmetry requires a complex field")
    if fmt == "array" and fld == "pattern":
        raise UnsupportedField("pattern field is only valid in coordinate format")
    return MatrixMarketHeader(obj, fmt, fld, sym)


def _ints(tokens, what: str) -> list[int]:
    try:
        return [int(t) for t in tokens]
    except ValueError as exc:
        raise BadDimensions(f"non-integer {what}: {tokens}") from exc


def _expand_symmetry(sym: str, r, c, v):
    if sym == "general":
        return r, c, v
    off = r != c
    if sym == "symmetric":
        mv = v[off]
    elif sym == "hermitian":
        mv = np.conj(v[off])
    else:  # skew-symmetric
        if np.any(~off & (v != 0)):
            raise BadDimensions("skew-symmetric matrix with nonzero diagonal")
        mv = -v[off]
    return (np.concatenate([r, c[off]]), np.concatenate([c, r[off]]),
            np.concatenate([v, mv]))


def parse_matrix_market(data, strict: bool = False) -> CsrMatrix:
    """Parse a Matrix Market ``matrix`` into a :class:`CsrMatrix`.

    Parameters
    ----------
    data : bytes or str
        Full file contents.
    strict : bool
        Raise :class:`DuplicateEntry` instead of summing repeated (i, j)
        entries (after symmetry expansion).
    """
    if isinstance(data, (bytes, bytearray)):
        data = bytes(data).decode("utf-8")
    lines = data.splitlines()
    if not lines:
        raise BadBanner("empty input")
    hdr = _parse_header(lines[0])
    body = [ln for ln in lines[1:] if ln.strip() and not ln.lstrip().startswith("%")]
    if not body:
        raise BadDimensions("missing size line")
    size = _ints(body[0].split(), "size line")
    tokens = " ".join(body[1:]).split()

    if hdr.format == "coordinate":
        if len(size) != 3:
            raise BadDimensions("coordinate size line must be 'rows cols nnz'")
        nrows, ncols, nnz = size
    else:
        if len(size) != 2:
            raise BadDimensions("array size line must be 'rows cols'")
        nrows, ncols = size
        nnz = None
    if nrows < 0 or ncols < 0 or (nnz is not None and nnz < 0):
        raise BadDimensions("negative dimension")
    if nrows != ncols:
        raise NonSquare(f"matrix is {nrows} x {ncols}")
    n = nrows

    per_value = {"pattern": 0, "real": 1, "integer": 1, "complex": 2}[hdr.field]
    if hdr.format == "coordinate":
        per = 2 + per_value
        if len(tokens) != nnz * per:
            raise BadDimensions(f"expected {nnz} entries of {per} tokens, got {len(tokens)} tokens")
        try:
            arr = np.array(tokens, dtype=float).reshape(nnz, per)
        except ValueError as exc:
            raise BadDimensions(f"unparseable entry: {exc}") from exc
        idx = arr[:, :2]
        if np.any(idx != np.round(idx)):
            raise BadDimensions("non-integer index")
        r = idx[:, 0].astype(np.int64) - 1
        c = idx[:, 1].astype(np.int64) - 1
        if nnz and (r.min() < 0 or c.min() < 0 or r.max() >= n or c.max() >= n):
            raise IndexOutOfRange("entry index outside 1..n")
        if per_value == 0:
            v = np.ones(nnz, dtype=np.complex128)
        elif per_value == 1:
            v = arr[:, 2].astype(np.complex128)
        else:
            v = arr[:, 2] + 1j * arr[:, 3]
    else:
        if hdr.symmetry == "general":
            cols_r = [(i, j) for j in range(n) for i in range(n)]
        elif hdr.symmetry == "skew-symmetric":
            cols_r = [(i, j) for j in range(n) for i in range(j + 1, n)]
        else:
            cols_r = [(i, j) for j in range(n) for i in range(j, n)]
        count = len(cols_r)
        if len(tokens) != count * per_value:
            raise BadDimensions(f"expected {count} array values, got {len(tokens) // max(per_value, 1)}")
        try:
            arr = np.array(tokens, dtype=float).reshape(count, per_value)
        except ValueError as exc:
            raise BadDimensions(f"unparseable entry: {exc}") from exc
        v = arr[:, 0] + (1j * arr[:, 1] if per_value == 2 else 0)
        v = v.astype(np.complex128)
        ij = np.array(cols_r, dtype=np.int64).reshape(-1, 2)
        r, c = ij[:, 0], ij[:, 1]
        keep = v != 0
        r, c, v = r[keep], c[keep], v[keep]

    r, c, v = _expand_symmetry(hdr.symmetry, r, c, v)
    if strict and len(r):
        key = r * n + c
        if len(np.unique(key)) != len(key):
            raise DuplicateEntry("duplicate (i, j) entries present")
    return CsrMatrix.from_coo(n, r, c, v)


def read_matrix_market(path, strict: bool = False) -> CsrMatrix:
    """Read a ``.mtx`` (optionally ``.mtx.gz``) file."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return parse_matrix_market(raw, strict=strict)


def write_matrix_market(A: CsrMatrix, target=None, field: str | None = None) -> str:
    """Write ``A`` as a general coordinate Matrix Market file.

    ``field`` defaults to ``real`` when every stored value is real, else
    ``complex``.  Values use 17 significant digits so that a parse of the
    output reproduces ``A`` exactly.  Returns the text; also writes it to
    ``target`` (path or text stream) when given.
    """
    rows, cols, vals = A.triplets()
    if field is None:
        field = "real" if np.all(vals.imag == 0) else "complex"
    if field not in ("real", "complex"):
        raise UnsupportedField(f"cannot write field {field!r}")
    buf = io.StringIO()
    buf.write(f"%%MatrixMarket matrix coordinate {field} general\n")
    buf.write(f"{A.n} {A.n} {len(vals)}\n")
    for i, j, x in zip(rows, cols, vals):
        if field == "real":
            buf.write(f"{i + 1} {j + 1} {x.real:.17g}\n")
        else:
            buf.write(f"{i + 1} {j + 1} {x.real:.17g} {x.imag:.17g}\n")
    text = buf.getvalue()
    if target is not None:
        if hasattr(target, "write"):
            target.write(text)
        else:
            Path(target).write_text(text, encoding="utf-8")
    return text
