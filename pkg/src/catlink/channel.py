"""Lossy transmission of the two-mode cat family.

The family is the normalized mixture

    rho = (rho_inc + r rho_coh) / (2 [1 + r exp(-2(|a0|^2 + |a1|^2))])

over ``|a0, -a1>`` and ``|-a0, a1>``. Loss maps it into itself, so the
analytic route only has to track ``(a0, a1, r)``; the discrete route runs the
beam-splitter chain on the density matrix and is refitted to the family.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import fock
from .fock import DensityMatrix, KronSum, ModeSpec

FIT_THRESHOLD = 1e-6


@dataclass(frozen=True)
class ParamState:
    alpha0: complex
    alpha1: complex
    r: float
    base_alpha: complex | None = None

    def __post_init__(self):
        if not abs(self.r) <= 1 + 1e-12:
            raise ValueError(f"purity parameter must satisfy |r| <= 1, got {self.r}")
        if self.base_alpha is None:
            object.__setattr__(self, "base_alpha", self.alpha0)
        if self.normalization <= 0:
            raise ValueError("r = -1 with vanishing amplitudes describes no state")

    @classmethod
    def pure(cls, alpha: complex) -> "ParamState":
        """State leaving the preparation stage: ``r = 1``, both amplitudes ``alpha``."""
        return cls(alpha, alpha, 1.0, alpha)

    @classmethod
    def symmetric(cls, alpha: complex, r: float) -> "ParamState":
        return cls(alpha, alpha, r, alpha)

    @property
    def overlap(self) -> float:
        """``<a0,-a1|-a0,a1> = exp(-2(|a0|^2 + |a1|^2))``."""
        return math.exp(-2 * (abs(self.alpha0) ** 2 + abs(self.alpha1) ** 2))

    @property
    def normalization(self) -> float:
        return 2 * (1 + self.r * self.overlap)

    def default_cutoff(self) -> int:
        return fock.default_cutoff(max(abs(self.alpha0), abs(self.alpha1)))


@dataclass(frozen=True)
class ChannelSpec:
    T0: float
    T1: float
    L: float = 1.0
    l: float = 1.0
    n_steps: int = 1

    def __post_init__(self):
        if not (0 < self.T0 <= 1 and 0 < self.T1 <= 1):
            raise ValueError("transmittances must lie in (0, 1]")
        if self.L <= 0 or self.l < 0:
            raise ValueError("need L > 0 and l >= 0")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")

    @property
    def step_transmittances(self) -> tuple[float, float]:
        x = self.l / (self.L * self.n_steps)
        return self.T0**x, self.T1**x

    def with_length(self, l: float) -> "ChannelSpec":
        return replace(self, l=l)


def _branch_vectors(ps: ParamState, cutoff: int):
    """Factors of the two family components ``A = |a0,-a1>`` and ``B = |-a0,a1>``."""
    a0p = fock.coherent_amplitudes(ps.alpha0, cutoff)
    a0m = fock.coherent_amplitudes(-ps.alpha0, cutoff)
    a1p = fock.coherent_amplitudes(ps.alpha1, cutoff)
    a1m = fock.coherent_amplitudes(-ps.alpha1, cutoff)
    return (a0p, a1m), (a0m, a1p)


def to_kron_sum(ps: ParamState, cutoff: int | None = None) -> KronSum:
    cutoff = ps.default_cutoff() if cutoff is None else cutoff
    A, B = _branch_vectors(ps, cutoff)
    n = ps.normalization
    terms = []
    for (x, y), w in (((A, A), 1.0), ((B, B), 1.0), ((A, B), ps.r), ((B, A), ps.r)):
        terms.append((w / n, np.outer(x[0], y[0].conj()), np.outer(x[1], y[1].conj())))
    return KronSum(ModeSpec((cutoff, cutoff)), tuple(terms))


def to_density_matrix(ps: ParamState, cutoff: int | None = None) -> DensityMatrix:
    """Dense Fock matrix of the family member; normalization is analytic."""
    cutoff = ps.default_cutoff() if cutoff is None else cutoff
    A, B = _branch_vectors(ps, cutoff)
    va = np.kron(A[0], A[1])
    vb = np.kron(B[0], B[1])
    inc = np.outer(va, va.conj()) + np.outer(vb, vb.conj())
    coh = np.outer(va, vb.conj()) + np.outer(vb, va.conj())
    return DensityMatrix(ModeSpec((cutoff, cutoff)), (inc + ps.r * coh) / ps.normalization)


# --------------------------------------------------------------------------- loss


def loss_kraus(transmittance: float, cutoff: int, cutoff_env: int | None = None) -> list[np.ndarray]:
    """Kraus vectors of one loss step from the vacuum-ancilla dilation.

    Entry ``k_l[m]`` is ``<m-l, l| U |m, 0>`` for the beam splitter with
    ``|T| = transmittance``; the operator maps ``|m>`` to ``|m-l>``.
    """
    t = float(transmittance)
    if not 0 < t <= 1:
        raise ValueError("step transmittance must lie in (0, 1]")
    cutoff_env = cutoff if cutoff_env is None else cutoff_env
    refl = math.sqrt(max(0.0, 1 - t * t))
    U = fock.beam_splitter_matrix(t, refl, cutoff, cutoff_env)
    d_env = cutoff_env + 1
    kraus = []
    for l in range(min(cutoff, cutoff_env) + 1):
        k = np.zeros(cutoff + 1, dtype=complex)
        for m in range(l, cutoff + 1):
            k[m] = U[(m - l) * d_env + l, m * d_env]
        kraus.append(k)
    return kraus


def _apply_loss_tensor(t: np.ndarray, ax_ket: int, ax_bra: int, kraus: list[np.ndarray]) -> np.ndarray:
    t = np.moveaxis(t, (ax_ket, ax_bra), (0, 1))
    out = np.zeros_like(t)
    d = t.shape[0]
    extra = (None,) * (t.ndim - 2)
    for l, k in enumerate(kraus):
        if l >= d:
            break
        w = np.outer(k[l:], k[l:].conj())[(...,) + extra]
        out[: d - l, : d - l] += w * t[l:, l:]
    return np.moveaxis(out, (0, 1), (ax_ket, ax_bra))


def loss_step(rho: DensityMatrix, mode: int, transmittance_step: float, cutoff_env: int | None = None) -> DensityMatrix:
    """One beam splitter with a vacuum ancilla on ``mode``; the ancilla is traced out."""
    if transmittance_step == 1:
        return rho
    cutoff = rho.modes.cutoffs[mode]
    kraus = loss_kraus(transmittance_step, cutoff, cutoff_env)
    n = rho.modes.n_modes
    t = _apply_loss_tensor(rho.tensor, mode, n + mode, kraus)
    return DensityMatrix.from_tensor(rho.modes, t)


def propagate_discrete(rho: DensityMatrix, spec: ChannelSpec) -> DensityMatrix:
    """``n_steps`` alternating loss steps on modes 0 and 1."""
    t0, t1 = spec.step_transmittances
    for _ in range(spec.n_steps):
        rho = loss_step(rho, 0, t0)
        rho = loss_step(rho, 1, t1)
    return rho


def propagate_analytic(ps: ParamState, spec: ChannelSpec) -> ParamState:
    """Exact update of ``(a0, a1, r)``.

    Amplitudes shrink by ``T_j^(l/L)``; the coherence picks up
    ``exp(-2 sum_j (|a_j|^2 - |a_j'|^2))``, which for a freshly prepared pulse
    reproduces ``r = exp(-2(2|a|^2 - |a0|^2 - |a1|^2))``.
    """
    x = spec.l / spec.L
    a0 = ps.alpha0 * spec.T0**x
    a1 = ps.alpha1 * spec.T1**x
    lost = abs(ps.alpha0) ** 2 - abs(a0) ** 2 + abs(ps.alpha1) ** 2 - abs(a1) ** 2
    return ParamState(a0, a1, ps.r * math.exp(-2 * lost), ps.base_alpha)


def purity_small_length(alpha: complex, spec: ChannelSpec) -> float:
    """Leading-order purity for ``l << L`` with the amplitude damping neglected."""
    x = spec.l / spec.L
    return math.exp(4 * abs(alpha) ** 2 * (math.log(spec.T0) + math.log(spec.T1)) * x)


def generator(rho: DensityMatrix, spec: ChannelSpec) -> DensityMatrix:
    """Right-hand side ``d rho / dx`` of the two-mode damping master equation."""
    out = np.zeros_like(rho.matrix)
    for mode, T in enumerate((spec.T0, spec.T1)):
        cutoffs = rho.modes.cutoffs
        a_loc = fock.annihilation(cutoffs[mode])
        eye = [np.eye(c + 1) for c in cutoffs]
        ops = list(eye)
        ops[mode] = a_loc
        a = ops[0]
        for o in ops[1:]:
            a = np.kron(a, o)
        n_op = a.conj().T @ a
        m = rho.matrix
        out += math.log(T) * (n_op @ m - 2 * a @ m @ a.conj().T + m @ n_op)
    return DensityMatrix(rho.modes, out / spec.L)


# --------------------------------------------------------------------------- fitting


@dataclass(frozen=True)
class FitResult:
    state: ParamState
    residual: float

    @property
    def in_family(self) -> bool:
        return self.residual < FIT_THRESHOLD

    def __iter__(self):
        return iter((self.state, self.residual))


def _pick_root(z2: complex, reference: complex) -> complex:
    root = complex(np.sqrt(complex(z2)))
    if (root * np.conj(reference)).real < 0:
        root = -root
    return root


def fit_param_state(
    rho: DensityMatrix | KronSum, base_alpha: complex, residual: bool = True
) -> FitResult:
    """Recover ``(a0, a1, r)`` from a two-mode Fock state.

    Within the family ``<a0^2> = a0^2`` and ``<a0 a1> = -a0 a1`` hold exactly,
    which fixes the amplitudes up to the joint sign flip the family is
    invariant under; the root closest to ``base_alpha`` is taken. ``r`` then
    follows from ``<a0,-a1|rho|-a0,a1>``.
    """
    tr = rho.trace
    c0, c1 = rho.modes.cutoffs
    a0_op, a1_op = fock.annihilation(c0), fock.annihilation(c1)
    m00 = rho.expect_local([a0_op @ a0_op, None]) / tr
    m11 = rho.expect_local([None, a1_op @ a1_op]) / tr
    m01 = rho.expect_local([a0_op, a1_op]) / tr

    ref = base_alpha if base_alpha else 1.0
    if abs(m00) >= abs(m11) and abs(m00) > 1e-14:
        a0 = _pick_root(m00, ref)
        a1 = -m01 / a0
    elif abs(m11) > 1e-14:
        a1 = _pick_root(m11, ref)
        a0 = -m01 / a1
    else:
        a0 = a1 = 0j
    a0, a1 = complex(a0), complex(a1)

    eps = math.exp(-2 * (abs(a0) ** 2 + abs(a1) ** 2))
    if 1 - eps < 1e-12:
        r = 1.0
    else:
        bra = fock.product(fock.coherent_state(a0, c0), fock.coherent_state(-a1, c1))
        ket = fock.product(fock.coherent_state(-a0, c0), fock.coherent_state(a1, c1))
        c = (rho.sandwich(bra, ket) / tr).real
        r = 2 * (c - eps) / (1 + eps * eps - 2 * c * eps)
        r = float(np.clip(r, -1.0, 1.0))
    fitted = ParamState(a0, a1, r, base_alpha)
    res = math.nan
    if residual:
        dense = rho.dense() if isinstance(rho, KronSum) else rho
        ref_dm = to_density_matrix(fitted, c0) if c0 == c1 else _to_dm_uneven(fitted, c0, c1)
        res = float(np.linalg.norm(dense.matrix / tr - ref_dm.matrix))
    return FitResult(fitted, res)


def _to_dm_uneven(ps: ParamState, c0: int, c1: int) -> DensityMatrix:
    va = np.kron(fock.coherent_amplitudes(ps.alpha0, c0), fock.coherent_amplitudes(-ps.alpha1, c1))
    vb = np.kron(fock.coherent_amplitudes(-ps.alpha0, c0), fock.coherent_amplitudes(ps.alpha1, c1))
    inc = np.outer(va, va.conj()) + np.outer(vb, vb.conj())
    coh = np.outer(va, vb.conj()) + np.outer(vb, va.conj())
    return DensityMatrix(ModeSpec((c0, c1)), (inc + ps.r * coh) / ps.normalization)
