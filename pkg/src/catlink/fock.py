"""Truncated Fock-space states, the two elementary gates, projections and partial traces.

Multimode states are stored densely. A pure state is an amplitude tensor with
one axis per mode; a density matrix is a square matrix over the joint basis
(row-major ordering of the occupation tuple), viewable as a tensor with
``2 * n_modes`` axes.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import expm, schur


@dataclass(frozen=True)
class Tolerances:
    norm: float = 1e-9
    leak: float = 1e-6


TOL = Tolerances()

# cap on the number of joint amplitudes a single ModeSpec may describe
MAX_AMPLITUDES = 2**24


class UnderTruncationWarning(UserWarning):
    """Weight on the top Fock level of some mode exceeds the leakage tolerance."""


def default_cutoff(alpha: complex) -> int:
    """Cutoff for a mode carrying a coherent amplitude ``alpha``.

    ``ceil(|a|^2 + 5|a| + 10)`` keeps the Poisson tail below ~1e-10 for the
    amplitudes used here.
    """
    a = abs(alpha)
    return int(math.ceil(a * a + 5 * a + 10))


@dataclass(frozen=True)
class ModeSpec:
    cutoffs: tuple[int, ...]

    def __post_init__(self):
        cutoffs = tuple(int(c) for c in self.cutoffs)
        object.__setattr__(self, "cutoffs", cutoffs)
        if any(c < 1 for c in cutoffs):
            raise ValueError(f"every cutoff must be >= 1, got {cutoffs}")
        if math.prod(c + 1 for c in cutoffs) > MAX_AMPLITUDES:
            raise ValueError(f"joint dimension of cutoffs {cutoffs} exceeds MAX_AMPLITUDES")

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(c + 1 for c in self.cutoffs)

    @property
    def n_modes(self) -> int:
        return len(self.cutoffs)

    @property
    def size(self) -> int:
        return math.prod(self.dims)

    def without(self, mode: int) -> "ModeSpec":
        return ModeSpec(self.cutoffs[:mode] + self.cutoffs[mode + 1 :])

    def select(self, modes: Sequence[int]) -> "ModeSpec":
        return ModeSpec(tuple(self.cutoffs[m] for m in modes))

    def __add__(self, other: "ModeSpec") -> "ModeSpec":
        return ModeSpec(self.cutoffs + other.cutoffs)


@dataclass(frozen=True, eq=False)
class PureState:
    modes: ModeSpec
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != self.modes.dims:
            raise ValueError(f"amplitude shape {amps.shape} does not match dims {self.modes.dims}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm2(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def normalize(self) -> "PureState":
        n2 = self.norm2
        if n2 == 0.0:
            raise ZeroDivisionError("cannot normalize a zero state")
        return PureState(self.modes, self.amplitudes / math.sqrt(n2))

    def leakage(self) -> float:
        """Largest probability weight found on any mode's top Fock level."""
        probs = np.abs(self.amplitudes) ** 2
        worst = 0.0
        for axis in range(self.modes.n_modes):
            worst = max(worst, float(np.take(probs, -1, axis=axis).sum()))
        return worst

    def under_truncated(self, tol: float | None = None) -> bool:
        return self.leakage() >= (TOL.leak if tol is None else tol)

    def overlap(self, other: "PureState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def fidelity(self, other: "PureState") -> float:
        return abs(self.overlap(other)) ** 2 / (self.norm2 * other.norm2)

    def vector(self) -> np.ndarray:
        return self.amplitudes.reshape(-1)

    def density(self) -> "DensityMatrix":
        v = self.vector()
        return DensityMatrix(self.modes, np.outer(v, v.conj()))

    def expect_number(self, mode: int) -> float:
        probs = np.abs(self.amplitudes) ** 2
        shape = [1] * self.modes.n_modes
        shape[mode] = -1
        n = np.arange(self.modes.dims[mode]).reshape(shape)
        return float((probs * n).sum())


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    modes: ModeSpec
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        d = self.modes.size
        if mat.shape != (d, d):
            raise ValueError(f"matrix shape {mat.shape} does not match joint dimension {d}")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def tensor(self) -> np.ndarray:
        return self.matrix.reshape(self.modes.dims * 2)

    @classmethod
    def from_tensor(cls, modes: ModeSpec, tensor: np.ndarray) -> "DensityMatrix":
        return cls(modes, np.asarray(tensor).reshape(modes.size, modes.size))

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def normalize(self) -> "DensityMatrix":
        return DensityMatrix(self.modes, self.matrix / self.trace)

    def is_valid(self, tol: float | None = None) -> bool:
        tol = TOL.norm if tol is None else tol
        m = self.matrix
        if np.max(np.abs(m - m.conj().T), initial=0.0) > tol:
            return False
        if not -tol <= self.trace <= 1 + tol:
            return False
        return bool(np.linalg.eigvalsh((m + m.conj().T) / 2).min() >= -tol)

    def diagonal(self) -> np.ndarray:
        """Joint photon-number distribution as a tensor over the modes."""
        return np.diagonal(self.matrix).real.reshape(self.modes.dims)

    def distance(self, other: "DensityMatrix") -> float:
        return float(np.linalg.norm(self.matrix - other.matrix))

    def expect(self, op: np.ndarray) -> complex:
        return complex(np.einsum("ij,ji->", self.matrix, op))

    def expect_local(self, ops: Sequence[np.ndarray | None]) -> complex:
        """Expectation of a product of single-mode operators (``None`` = identity)."""
        t = self.tensor
        n = self.modes.n_modes
        for m, op in enumerate(ops):
            if op is None:
                op = np.eye(self.modes.dims[m])
            # contract the ket index of mode m with op, bra side is traced below
            t = np.moveaxis(np.tensordot(op, t, axes=([1], [m])), 0, m)
        idx = list(range(n)) * 2
        return complex(np.einsum(t, idx))

    def sandwich(self, bra: PureState, ket: PureState) -> complex:
        """``<bra| rho |ket>`` with the given (possibly unnormalized) vectors."""
        return complex(np.vdot(bra.vector(), self.matrix @ ket.vector()))

    def leakage(self) -> float:
        diag = self.diagonal()
        worst = 0.0
        for axis in range(self.modes.n_modes):
            worst = max(worst, float(np.take(diag, -1, axis=axis).sum()))
        return worst


State = PureState | DensityMatrix


# --------------------------------------------------------------------------- construction


def coherent_amplitudes(alpha: complex, cutoff: int) -> np.ndarray:
    amps = np.empty(cutoff + 1, dtype=complex)
    amps[0] = math.exp(-abs(alpha) ** 2 / 2)
    for k in range(1, cutoff + 1):
        amps[k] = amps[k - 1] * alpha / math.sqrt(k)
    return amps


def coherent_state(alpha: complex, cutoff: int) -> PureState:
    """Truncated coherent state; the truncation deficit is kept, not renormalized."""
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    return PureState(ModeSpec((cutoff,)), coherent_amplitudes(alpha, cutoff))


def fock_state(n: int, cutoff: int) -> PureState:
    if not 0 <= n <= cutoff:
        raise ValueError(f"photon number {n} outside 0..{cutoff}")
    amps = np.zeros(cutoff + 1, dtype=complex)
    amps[n] = 1.0
    return PureState(ModeSpec((cutoff,)), amps)


def vacuum(cutoff: int) -> PureState:
    return fock_state(0, cutoff)


def product(*states: PureState) -> PureState:
    amps = np.ones((), dtype=complex)
    cutoffs: tuple[int, ...] = ()
    for s in states:
        amps = np.multiply.outer(amps, s.amplitudes)
        cutoffs += s.modes.cutoffs
    return PureState(ModeSpec(cutoffs), amps)


def pad(state: PureState, mode: int, cutoff: int) -> PureState:
    """Raise the cutoff of ``mode`` by zero-padding (never truncates)."""
    old = state.modes.cutoffs[mode]
    if cutoff < old:
        raise ValueError("pad cannot lower a cutoff")
    widths = [(0, 0)] * state.modes.n_modes
    widths[mode] = (0, cutoff - old)
    cutoffs = list(state.modes.cutoffs)
    cutoffs[mode] = cutoff
    return PureState(ModeSpec(tuple(cutoffs)), np.pad(state.amplitudes, widths))


def warn_if_truncated(state: PureState | DensityMatrix, what: str = "state") -> float:
    leak = state.leakage()
    if leak >= TOL.leak:
        warnings.warn(
            f"{what}: weight {leak:.3e} on top Fock level exceeds {TOL.leak:g}",
            UnderTruncationWarning,
            stacklevel=2,
        )
    return leak


# --------------------------------------------------------------------------- single-mode operators


def annihilation(cutoff: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), 1).astype(complex)


def number_diag(cutoff: int) -> np.ndarray:
    return np.arange(cutoff + 1, dtype=float)


def parity_diag(cutoff: int) -> np.ndarray:
    return np.where(np.arange(cutoff + 1) % 2 == 0, 1.0, -1.0)


# --------------------------------------------------------------------------- beam splitter


def _check_unitary_pair(T: complex, R: complex) -> None:
    if abs(abs(T) ** 2 + abs(R) ** 2 - 1) > TOL.norm:
        raise ValueError(f"|T|^2 + |R|^2 must be 1, got {abs(T) ** 2 + abs(R) ** 2!r}")


def mode_matrix(T: complex, R: complex) -> np.ndarray:
    """Heisenberg matrix ``M`` with ``U^dag (a_j, a_k)^T U = M (a_j, a_k)^T``."""
    return np.array([[T, R], [-np.conj(R), np.conj(T)]], dtype=complex)


def _unitary_log(M: np.ndarray) -> np.ndarray:
    """Anti-Hermitian ``G`` with ``exp(G) = M`` for unitary ``M``.

    ``M`` is normal, so its complex Schur form is diagonal and the Schur
    vectors are an orthonormal eigenbasis; the log is taken eigenvalue-wise.
    """
    D, Z = schur(M, output="complex")
    phases = np.angle(np.diag(D))
    return (Z * (1j * phases)) @ Z.conj().T


@lru_cache(maxsize=256)
def _bs_block(T: complex, R: complex, total: int) -> np.ndarray:
    """Unitary on the ``total``-photon block, basis ``|m, total-m>`` for m = 0..total.

    With ``U = exp(a^dag G a)`` one has ``U^dag a U = exp(G) a``, so ``G = log M``.
    """
    G = _unitary_log(mode_matrix(T, R))
    m = np.arange(total + 1)
    gen = np.diag(G[0, 0] * m + G[1, 1] * (total - m)).astype(complex)
    # a_j^dag a_k : |m, N-m> -> sqrt((m+1)(N-m)) |m+1, N-m-1>
    hop = np.sqrt((m[:-1] + 1) * (total - m[:-1]))
    gen[m[1:], m[:-1]] += G[0, 1] * hop
    gen[m[:-1], m[1:]] += G[1, 0] * hop
    return expm(gen)


def _move_pair_last(t: np.ndarray, j: int, k: int) -> np.ndarray:
    return np.moveaxis(t, (j, k), (-2, -1))


def _apply_bs_tensor(t: np.ndarray, j: int, k: int, T: complex, R: complex, conj: bool) -> np.ndarray:
    dj, dk = t.shape[j], t.shape[k]
    work = _move_pair_last(t, j, k)
    out = np.zeros_like(work)
    for total in range(dj + dk - 1):
        lo, hi = max(0, total - dk + 1), min(total, dj - 1)
        m = np.arange(lo, hi + 1)
        block = _bs_block(complex(T), complex(R), total)[np.ix_(m, m)]
        if conj:
            block = block.conj()
        vals = work[..., m, total - m]
        out[..., m, total - m] = vals @ block.T
    return np.moveaxis(out, (-2, -1), (j, k))


def apply_beam_splitter(state: State, j: int, k: int, T: complex, R: complex) -> State:
    """Beam splitter ``U_jk(T, R)`` on modes ``j`` and ``k``.

    Acts photon-number block by block; amplitude pushed above a cutoff is lost.
    """
    if j == k:
        raise ValueError("beam splitter needs two distinct modes")
    _check_unitary_pair(T, R)
    if isinstance(state, PureState):
        amps = _apply_bs_tensor(state.amplitudes, j, k, T, R, conj=False)
        return PureState(state.modes, amps)
    n = state.modes.n_modes
    t = _apply_bs_tensor(state.tensor, j, k, T, R, conj=False)
    t = _apply_bs_tensor(t, n + j, n + k, T, R, conj=True)
    return DensityMatrix.from_tensor(state.modes, t)


def beam_splitter_matrix(T: complex, R: complex, cutoff_j: int, cutoff_k: int) -> np.ndarray:
    """Dense truncated two-mode matrix of ``U_jk(T, R)``."""
    spec = ModeSpec((cutoff_j, cutoff_k))
    eye = np.eye(spec.size, dtype=complex).reshape(spec.dims + (spec.size,))
    out = _apply_bs_tensor(eye, 0, 1, T, R, conj=False)
    return out.reshape(spec.size, spec.size)


# --------------------------------------------------------------------------- cross-Kerr


def _kerr_mask(dims: Sequence[int], j: int, k: int) -> np.ndarray:
    shape_j = [1] * len(dims)
    shape_k = [1] * len(dims)
    shape_j[j] = dims[j]
    shape_k[k] = dims[k]
    nj = np.arange(dims[j]).reshape(shape_j)
    nk = np.arange(dims[k]).reshape(shape_k)
    return np.where((nj * nk) % 2 == 0, 1.0, -1.0)


def apply_cross_kerr(state: State, j: int, k: int) -> State:
    """``exp(i pi n_j n_k)``: sign flip on every component with odd ``n_j * n_k``."""
    if j == k:
        raise ValueError("cross-Kerr coupler needs two distinct modes")
    if isinstance(state, PureState):
        mask = _kerr_mask(state.modes.dims, j, k)
        return PureState(state.modes, state.amplitudes * mask)
    n = state.modes.n_modes
    dims = state.modes.dims * 2
    mask = _kerr_mask(dims, j, k) * _kerr_mask(dims, n + j, n + k)
    return DensityMatrix.from_tensor(state.modes, state.tensor * mask)


def apply_parity(state: State, mode: int) -> State:
    """Phase shift ``(-1)^{n_mode}``."""
    dims = state.modes.dims
    shape = [1] * len(dims)
    shape[mode] = dims[mode]
    p = parity_diag(dims[mode] - 1).reshape(shape)
    if isinstance(state, PureState):
        return PureState(state.modes, state.amplitudes * p)
    n = len(dims)
    t = state.tensor * p.reshape(shape + [1] * n) * p.reshape([1] * n + shape)
    return DensityMatrix.from_tensor(state.modes, t)


# --------------------------------------------------------------------------- measurement and tracing


def project_fock(state: PureState, j: int, n: int) -> tuple[PureState, float]:
    """Unnormalized branch ``<n|_j state`` and its squared norm."""
    if not 0 <= n <= state.modes.cutoffs[j]:
        raise ValueError(f"photon number {n} outside 0..{state.modes.cutoffs[j]}")
    amps = np.take(state.amplitudes, n, axis=j)
    branch = PureState(state.modes.without(j), amps)
    return branch, branch.norm2


def project_vector(state: PureState, j: int, bra: np.ndarray) -> PureState:
    """Contract mode ``j`` with ``<bra|`` (``bra`` given as a ket vector, conjugated here)."""
    d = state.modes.dims[j]
    b = np.zeros(d, dtype=complex)
    b[: min(d, len(bra))] = bra[:d]
    amps = np.tensordot(b.conj(), state.amplitudes, axes=([0], [j]))
    return PureState(state.modes.without(j), amps)


def partial_trace(rho: State, keep: Iterable[int]) -> DensityMatrix:
    """Reduced density matrix on the modes in ``keep`` (returned in ascending order)."""
    keep = sorted(set(keep))
    n = rho.modes.n_modes
    if not keep or keep[0] < 0 or keep[-1] >= n:
        raise ValueError(f"keep must be a nonempty subset of modes 0..{n - 1}")
    traced = [m for m in range(n) if m not in keep]
    sub = rho.modes.select(keep)
    if isinstance(rho, PureState):
        psi = rho.amplitudes
        red = np.tensordot(psi, psi.conj(), axes=(traced, traced))
        return DensityMatrix.from_tensor(sub, red)
    ket = list(range(n))
    bra = [n + m if m in keep else m for m in range(n)]
    out = keep + [n + m for m in keep]
    red = np.einsum(rho.tensor, ket + bra, out)
    return DensityMatrix.from_tensor(sub, red)


def von_neumann_entropy(rho: np.ndarray | DensityMatrix, base: float = 2.0) -> float:
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    w = np.linalg.eigvalsh((m + m.conj().T) / 2)
    w = w[w > 1e-15]
    return float(-(w * np.log(w)).sum() / math.log(base))


def mutual_information(rho: DensityMatrix) -> float:
    """Quantum mutual information (bits) between the two modes of a two-mode state."""
    if rho.modes.n_modes != 2:
        raise ValueError("mutual information is defined here for two-mode states")
    rho = rho.normalize()
    sa = von_neumann_entropy(partial_trace(rho, [0]))
    sb = von_neumann_entropy(partial_trace(rho, [1]))
    return sa + sb - von_neumann_entropy(rho)


# --------------------------------------------------------------------------- two-mode separable sums


@dataclass(frozen=True, eq=False)
class KronSum:
    """Two-mode operator ``sum_i c_i A_i (x) B_i`` kept in factored form.

    Used where every operation acts locally, so the joint matrix never has to
    be formed.
    """

    modes: ModeSpec
    terms: tuple[tuple[complex, np.ndarray, np.ndarray], ...]

    def dense(self) -> DensityMatrix:
        d = self.modes.size
        out = np.zeros((d, d), dtype=complex)
        for c, a, b in self.terms:
            out += c * np.kron(a, b)
        return DensityMatrix(self.modes, out)

    @property
    def trace(self) -> float:
        return float(sum(c * np.trace(a) * np.trace(b) for c, a, b in self.terms).real)

    def normalize(self) -> "KronSum":
        tr = self.trace
        return KronSum(self.modes, tuple((c / tr, a, b) for c, a, b in self.terms))

    def expect_local(self, ops: Sequence[np.ndarray | None]) -> complex:
        op0, op1 = ops
        total = 0j
        for c, a, b in self.terms:
            ta = np.trace(a) if op0 is None else np.einsum("ij,ji->", a, op0)
            tb = np.trace(b) if op1 is None else np.einsum("ij,ji->", b, op1)
            total += c * ta * tb
        return complex(total)

    def sandwich(self, bra: PureState, ket: PureState) -> complex:
        """``<bra|X|ket>`` for product vectors given as two-mode PureStates."""
        bra0, bra1 = _factor_product(bra)
        ket0, ket1 = _factor_product(ket)
        return complex(
            sum(c * np.vdot(bra0, a @ ket0) * np.vdot(bra1, b @ ket1) for c, a, b in self.terms)
        )

    def conjugate_diag(self, d0: np.ndarray, d1: np.ndarray) -> "KronSum":
        """``D X D^dag`` for a diagonal product ``D = diag(d0) (x) diag(d1)``."""
        out = []
        for c, a, b in self.terms:
            out.append((c, d0[:, None] * a * d0.conj()[None, :], d1[:, None] * b * d1.conj()[None, :]))
        return KronSum(self.modes, tuple(out))


def _factor_product(state: PureState) -> tuple[np.ndarray, np.ndarray]:
    """Split a rank-one two-mode amplitude tensor into its two factors."""
    amps = state.amplitudes
    u, s, vh = np.linalg.svd(amps)
    if s.size > 1 and s[1] > 1e-12 * max(s[0], 1e-300):
        raise ValueError("sandwich on KronSum needs product bra/ket vectors")
    return u[:, 0] * s[0], vh[0]
