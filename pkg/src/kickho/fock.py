"""Kick and Floquet operators in a truncated Fock basis.

Matrix elements of ``cos(eta (a + a^dagger))`` are evaluated in closed form,
so the ``N x N`` matrix is the exact projection of the infinite-dimensional
operator onto the lowest ``N`` Fock states. The projection is then
exponentiated through its eigendecomposition, which keeps the kick operator
exactly unitary at every ``N``. Note that ``exp(P C P)`` is not ``P exp(C) P``:
truncation error therefore shows up as population reaching the top of the
basis (see :func:`kickho.propagation.leakage`), never as a unitarity defect.

``cos(eta (a + a^dagger))`` only couples Fock states of equal parity, so all
operators built here are block diagonal in the even/odd sectors and the
eigendecompositions are done block by block.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import linalg
from scipy.special import gammaln

from .exceptions import DomainError, NumericError
from .params import SystemParams

_RESCALE = 1e150
_LOG_RESCALE = np.log(_RESCALE)


@dataclass(frozen=True)
class FockBasis:
    size: int

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 2:
            raise DomainError(f"basis size must be an integer >= 2, got {self.size!r}", "N")

    def __len__(self):
        return self.size

    @property
    def n(self) -> np.ndarray:
        return np.arange(self.size)

    def parity_slices(self):
        """Index arrays of the even and odd Fock states."""
        return np.arange(0, self.size, 2), np.arange(1, self.size, 2)


@dataclass(frozen=True)
class HermitianCosineOperator:
    basis: FockBasis
    elements: np.ndarray
    eta: float


@dataclass(frozen=True)
class FloquetOperator:
    basis: FockBasis
    matrix: np.ndarray
    params: SystemParams

    def unitarity_defect(self) -> float:
        return unitarity_defect(self.matrix)

    def parity_blocks(self):
        """``(indices, block)`` for the even and the odd sector."""
        return [(idx, self.matrix[np.ix_(idx, idx)]) for idx in self.basis.parity_slices()]


def unitarity_defect(M) -> float:
    """``max |M^dagger M - 1|`` elementwise."""
    M = np.asarray(M)
    return float(np.max(np.abs(M.conj().T @ M - np.eye(M.shape[0]))))


def _scaled_laguerre(x, eta, offsets, count):
    """Rows ``k`` hold ``eta^k exp(-x/2) sqrt(n!/(n+k)!) L_n^(k)(x)`` for ``n < count``.

    Uses the three-term recurrence in ``n`` at fixed order ``k`` on the
    factorial-normalised polynomials, with per-row rescaling so neither the
    polynomials nor the prefactor overflow for large ``n`` or ``k``.
    """
    k = np.asarray(offsets, dtype=float)
    out = np.zeros((len(k), count))
    log_pref = k * np.log(eta) - 0.5 * x - 0.5 * gammaln(k + 1.0)
    g_prev = np.zeros(len(k))
    g_cur = np.ones(len(k))
    log_scale = np.zeros(len(k))
    with np.errstate(under="ignore"):
        out[:, 0] = np.exp(log_pref)
        for n in range(count - 1):
            g_next = ((2 * n + 1 + k - x) * g_cur - np.sqrt(n * (n + k)) * g_prev) / np.sqrt(
                (n + 1) * (n + k + 1)
            )
            g_prev, g_cur = g_cur, g_next
            big = np.abs(g_cur) > _RESCALE
            if big.any():
                g_cur[big] /= _RESCALE
                g_prev[big] /= _RESCALE
                log_scale[big] += _LOG_RESCALE
            out[:, n + 1] = g_cur * np.exp(log_pref + log_scale)
    return out


def displacement_element(m: int, n: int, eta: float) -> complex:
    """``<m| exp(i eta (a + a^dagger)) |n>``.

    For ``m >= n`` this is ``sqrt(n!/m!) (i eta)^(m-n) exp(-eta^2/2) L_n^(m-n)(eta^2)``;
    the matrix is symmetric in ``m, n``.
    """
    if m < 0 or n < 0:
        raise DomainError(f"Fock indices must be non-negative, got ({m}, {n})")
    if eta < 0:
        raise DomainError(f"eta must be >= 0, got {eta}", "eta")
    if eta == 0:
        return complex(m == n)
    lo, k = min(m, n), abs(m - n)
    value = _scaled_laguerre(eta * eta, eta, [k], lo + 1)[0, lo]
    return complex(value * 1j**k)


def displacement_matrix(eta: float, basis: FockBasis) -> np.ndarray:
    """Full ``N x N`` projection of ``exp(i eta (a + a^dagger))``."""
    N = basis.size
    if eta < 0:
        raise DomainError(f"eta must be >= 0, got {eta}", "eta")
    if eta == 0:
        return np.eye(N, dtype=complex)
    table = _scaled_laguerre(eta * eta, eta, np.arange(N), N)
    D = np.zeros((N, N), dtype=complex)
    phase = 1j ** np.arange(N)
    for k in range(N):
        idx = np.arange(N - k)
        D[idx + k, idx] = phase[k] * table[k, : N - k]
        D[idx, idx + k] = phase[k] * table[k, : N - k]
    return D


def cosine_operator(eta: float, basis: FockBasis) -> HermitianCosineOperator:
    """Exact projection of ``cos(eta (a + a^dagger))`` onto the first ``N`` levels.

    Odd level differences are exact zeros; even ones carry the sign
    ``(-1)^(k/2)`` of ``i^k``.
    """
    if eta < 0:
        raise DomainError(f"eta must be >= 0, got {eta}", "eta")
    N = basis.size
    if eta == 0:
        return HermitianCosineOperator(basis, np.eye(N), 0.0)
    offsets = np.arange(0, N, 2)
    table = _scaled_laguerre(eta * eta, eta, offsets, N)
    C = np.zeros((N, N))
    for row, k in enumerate(offsets):
        idx = np.arange(N - k)
        vals = (-1.0) ** (k // 2) * table[row, : N - k]
        C[idx + k, idx] = vals
        C[idx, idx + k] = vals
    return HermitianCosineOperator(basis, C, float(eta))


def _block_exp(H, ktilde, context):
    try:
        w, V = linalg.eigh(H)
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericError("eigendecomposition of the cosine operator failed", context) from exc
    return (V * np.exp(-1j * ktilde * w)) @ V.T


def kick_operator(ktilde: float, C: HermitianCosineOperator) -> np.ndarray:
    """``exp(-i ktilde C)`` from the eigendecomposition of the real symmetric ``C``."""
    N = C.basis.size
    if ktilde == 0:
        return np.eye(N, dtype=complex)
    context = {"eta": C.eta, "ktilde": ktilde, "N": N}
    E = np.zeros((N, N), dtype=complex)
    for idx in C.basis.parity_slices():
        if len(idx) == 0:
            continue
        block = C.elements[np.ix_(idx, idx)]
        E[np.ix_(idx, idx)] = _block_exp(block, ktilde, context)
    return E


def free_phases(alpha: float, basis: FockBasis) -> np.ndarray:
    """Diagonal of ``exp(-i alpha a^dagger a)``."""
    return np.exp(-1j * alpha * basis.n)


def floquet_operator(params: SystemParams, basis: FockBasis) -> FloquetOperator:
    """One-period propagator: kick, then free rotation by ``alpha``."""
    C = cosine_operator(params.eta, basis)
    E = kick_operator(params.ktilde, C)
    U = free_phases(params.alpha, basis)[:, None] * E
    return FloquetOperator(basis, U, params)


# -- binary operator cache -------------------------------------------------

MAGIC = b"KHOP"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIdd")


def save_operator(path, matrix, eta: float, ktilde: float) -> None:
    """Write a square complex operator with its ``(eta, ktilde)`` tag.

    Layout (little-endian): 4-byte magic ``KHOP``, u32 format version,
    u32 ``N``, f64 ``eta``, f64 ``ktilde``, then ``N*N`` complex doubles
    (real, imaginary) in row-major order.
    """
    M = np.asarray(matrix, dtype="<c16")
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DomainError("operator must be a square matrix")
    with open(Path(path), "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, M.shape[0], float(eta), float(ktilde)))
        fh.write(np.ascontiguousarray(M).tobytes(order="C"))


def load_operator(path):
    """Inverse of :func:`save_operator`; returns ``(matrix, eta, ktilde)``."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError("truncated operator file")
    magic, version, N, eta, ktilde = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"not a kickho operator file (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported operator format version {version}")
    body = data[_HEADER.size :]
    if len(body) != 16 * N * N:
        raise ValueError("operator payload size does not match header")
    M = np.frombuffer(body, dtype="<c16").reshape(N, N).astype(complex)
    return M, eta, ktilde
