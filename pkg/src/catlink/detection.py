"""Reading out the purity of a transmitted cat pair.

Two routes: counting photon-number parity on both signal modes and correlating
the results, or coupling weak coherent probes (modes 6, 7) to the signals by
cross-Kerr couplers and looking at their interference on a screen. The second
route leaves the signal in place but dephases it; the trade-off between that
back-action and the statistical accuracy of the contrast is computed here too.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import fock
from .channel import ParamState, to_density_matrix
from .fock import DensityMatrix, ModeSpec
from .qubit import (
    BellMixture,
    bell_vectors,
    entanglement_from_weight,
    entanglement_of_formation,
    mutual_information as qubit_mutual_information,
)


def cosh_weight(x: float) -> float:
    """``C(x) = exp(-x) cosh(x)``, written to stay finite for large ``x``."""
    return (1 + math.exp(-2 * x)) / 2


def sinh_weight(x: float) -> float:
    return (1 - math.exp(-2 * x)) / 2


# --------------------------------------------------------------------------- parity counting


def parity_coincidence_closed(ps: ParamState) -> float:
    eps = ps.overlap
    return (ps.r + eps) / (1 + ps.r * eps)


def joint_parity_probabilities(rho: DensityMatrix) -> np.ndarray:
    """``P[p0, p1]`` for parities 0 (even) and 1 (odd), from the Fock diagonal."""
    c0, c1 = rho.modes.cutoffs
    diag = rho.diagonal().reshape(c0 + 1, c1 + 1).real
    out = np.zeros((2, 2))
    for p0 in (0, 1):
        for p1 in (0, 1):
            out[p0, p1] = diag[p0::2, p1::2].sum()
    return out / out.sum()


def parity_coincidence(ps: ParamState, cutoff: int | None = None) -> float:
    """``p(e,e) + p(u,u) - p(e,u) - p(u,e)`` summed over the Fock basis."""
    P = joint_parity_probabilities(to_density_matrix(ps, cutoff))
    return float(P[0, 0] + P[1, 1] - P[0, 1] - P[1, 0])


def sample_parity_coincidence(
    ps: ParamState, shots: int, seed: int = 0, cutoff: int | None = None
) -> tuple[float, float]:
    """Estimate from ``shots`` simulated parity readouts; returns (estimate, standard error)."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    P = joint_parity_probabilities(to_density_matrix(ps, cutoff)).reshape(-1)
    counts = np.random.default_rng(seed).multinomial(shots, P)
    est = (counts[0] + counts[3] - counts[1] - counts[2]) / shots
    return float(est), math.sqrt(max(0.0, 1 - est * est) / shots)


# --------------------------------------------------------------------------- probes and interference


def probe_cutoff(gamma: complex) -> int:
    return fock.default_cutoff(gamma)


def _probe_after_kerr(parity: int, gamma: complex, cutoff: int) -> np.ndarray:
    """Probe amplitudes after ``K`` with a signal of the given photon-number parity."""
    st = fock.product(fock.fock_state(parity, 1), fock.coherent_state(gamma, cutoff))
    st = fock.apply_cross_kerr(st, 0, 1)
    branch, _ = fock.project_fock(st, 0, parity)
    return branch.amplitudes


def probe_state(rho: DensityMatrix, gamma: complex, cutoff: int | None = None) -> DensityMatrix:
    """State of the probe modes (6, 7) after both couplers, signal traced out.

    Only the signal's joint parity distribution survives the trace.
    """
    cg = probe_cutoff(gamma) if cutoff is None else cutoff
    P = joint_parity_probabilities(rho)
    vecs = [_probe_after_kerr(p, gamma, cg) for p in (0, 1)]
    d = cg + 1
    out = np.zeros((d * d, d * d), dtype=complex)
    for p0 in (0, 1):
        for p1 in (0, 1):
            v = np.kron(vecs[p0], vecs[p1])
            out += P[p0, p1] * np.outer(v, v.conj())
    return DensityMatrix(ModeSpec((cg, cg)), out)


def intensity_operator(cutoff: int, delta_phi: float) -> np.ndarray:
    """``(a6 e^{-i phi6} + a7 e^{-i phi7})^dag (...)`` with ``phi6 = 0``, ``phi7 = delta_phi``."""
    a = fock.annihilation(cutoff)
    eye = np.eye(cutoff + 1)
    field_op = np.kron(a, eye) + np.exp(-1j * delta_phi) * np.kron(eye, a)
    return field_op.conj().T @ field_op


def interference_intensity(
    ps: ParamState, gamma: complex, delta_phi: float, cutoff: int | None = None, probe_cut: int | None = None
) -> float:
    """Screen intensity (arbitrary units) as a Fock expectation in the probe state."""
    rho67 = probe_state(to_density_matrix(ps, cutoff), gamma, probe_cut)
    op = intensity_operator(rho67.modes.cutoffs[0], delta_phi)
    return float(rho67.expect(op).real)


def interference_intensity_closed(ps: ParamState, gamma: complex, delta_phi: float) -> float:
    return 2 * abs(gamma) ** 2 * (1 + parity_coincidence_closed(ps) * math.cos(delta_phi))


def intensity_variance(
    ps: ParamState, gamma: complex, delta_phi: float, cutoff: int | None = None, probe_cut: int | None = None
) -> float:
    """``<I^2> - <I>^2`` in the probe state."""
    rho67 = probe_state(to_density_matrix(ps, cutoff), gamma, probe_cut)
    op = intensity_operator(rho67.modes.cutoffs[0], delta_phi)
    mean = rho67.expect(op).real
    return float(rho67.expect(op @ op).real - mean * mean)


def intensity_variance_closed(gamma: complex, delta_phi: float, mean_intensity: float) -> float:
    g2 = abs(gamma) ** 2
    return 4 * g2 * g2 * (math.cos(delta_phi) ** 2 - 1) + 2 * (1 + 2 * g2) * mean_intensity - mean_intensity**2


@dataclass
class InterferencePattern:
    gamma: complex
    samples: list[tuple[float, float]] = field(default_factory=list)
    contrast: float = 0.0
    sign_of_r: int = 1


def interference_pattern(
    ps: ParamState, gamma: complex, phases: np.ndarray, fock_level: bool = False
) -> InterferencePattern:
    f = interference_intensity if fock_level else interference_intensity_closed
    samples = [(float(d), f(ps, gamma, float(d))) for d in phases]
    vis, sign = contrast(ps, gamma)
    return InterferencePattern(gamma, samples, vis, sign)


def contrast(ps: ParamState, gamma: complex, fock_level: bool = True) -> tuple[float, int]:
    """Visibility from the fringe extremes at ``0`` and ``pi``; the sign of ``r``
    is read from which extreme sits at the symmetry point."""
    f = interference_intensity if fock_level else interference_intensity_closed
    at_zero = f(ps, gamma, 0.0)
    at_pi = f(ps, gamma, math.pi)
    i_max, i_min = max(at_zero, at_pi), min(at_zero, at_pi)
    vis = (i_max - i_min) / (i_max + i_min)
    return vis, 1 if at_zero >= at_pi else -1


def propagate_contrast_variance(i_max: float, i_min: float, var_max: float, var_min: float) -> float:
    """Relative variance of ``(I_max - I_min)/(I_max + I_min)`` by first-order propagation."""
    pref = (2 * i_max * i_min / (i_max**2 - i_min**2)) ** 2
    return pref * (var_max / i_max**2 + var_min / i_min**2)


def contrast_uncertainty(gamma: complex, M: float) -> float:
    """Closed-form relative variance of the contrast; infinite at ``M = 0``."""
    g2 = abs(gamma) ** 2
    if M == 0 or g2 == 0:
        return math.inf
    m2 = M * M
    return (1 / m2 - 1) / 2 * (1 / g2 + 1 + m2)


def contrast_uncertainty_fock(ps: ParamState, gamma: complex, cutoff: int | None = None) -> float:
    """Same quantity from Fock-level intensity moments at the two fringe extremes."""
    ends = []
    for d in (0.0, math.pi):
        ends.append((interference_intensity(ps, gamma, d, cutoff), intensity_variance(ps, gamma, d, cutoff)))
    (i0, v0), (ip, vp) = ends
    if i0 < ip:
        (i0, v0), (ip, vp) = (ip, vp), (i0, v0)
    return propagate_contrast_variance(i0, ip, v0, vp)


# --------------------------------------------------------------------------- back-action


def probe_dephasing_kernel(gamma: complex, cutoff: int, probe_cut: int | None = None) -> np.ndarray:
    """Factor multiplying signal element ``(n, n')`` once a probe has been traced out,
    from the overlaps of the parity-conditioned probe states."""
    cg = probe_cutoff(gamma) if probe_cut is None else probe_cut
    vecs = [_probe_after_kerr(p, gamma, cg) for p in (0, 1)]
    k = np.array([[np.vdot(vecs[q], vecs[p]) for q in (0, 1)] for p in (0, 1)])
    par = np.arange(cutoff + 1) % 2
    return k[np.ix_(par, par)]


def backaction_closed(ps: ParamState, gamma: complex, cutoff: int | None = None) -> DensityMatrix:
    """``C rho + S P1 rho P1`` with weights at ``2|gamma|^2``."""
    rho = to_density_matrix(ps, cutoff)
    c = rho.modes.cutoffs[0]
    x = 2 * abs(gamma) ** 2
    p1 = np.kron(np.ones(c + 1), fock.parity_diag(c))
    flipped = p1[:, None] * rho.matrix * p1[None, :]
    return DensityMatrix(rho.modes, cosh_weight(x) * rho.matrix + sinh_weight(x) * flipped)


def backaction_mixture(r: float, gamma: complex) -> BellMixture:
    x = 2 * abs(gamma) ** 2
    c, s = cosh_weight(x), sinh_weight(x)
    return BellMixture((c * (1 + r) / 2, c * (1 - r) / 2, s * (1 + r) / 2, s * (1 - r) / 2))


def backaction_state(
    ps: ParamState, gamma: complex, cutoff: int | None = None
) -> tuple[DensityMatrix, BellMixture]:
    """Signal state after both probes have passed, at Fock level and as a Bell mixture."""
    rho = to_density_matrix(ps, cutoff)
    c = rho.modes.cutoffs[0]
    k = probe_dephasing_kernel(gamma, c)
    kernel = np.kron(k, k)
    return DensityMatrix(rho.modes, rho.matrix * kernel), backaction_mixture(ps.r, gamma)


def entanglement_after_probe(r: float, gamma: complex) -> float:
    return entanglement_of_formation(backaction_mixture(r, gamma))


def entanglement_after_probe_fock(ps: ParamState, gamma: complex, cutoff: int | None = None) -> float:
    """Entanglement from the Bell reading of the Fock-level post-probe state."""
    rho, _ = backaction_state(ps, gamma, cutoff)
    mix, _ = bell_reading(rho, ps.alpha0)
    return entanglement_of_formation(mix)


def backaction_zero_crossing(
    r: float = 1.0, bracket: tuple[float, float] = (0.5, 1.5), samples: int = 2001
) -> float | None:
    """Smallest ``|gamma|`` in ``bracket`` where the remaining entanglement is zero,
    or ``None`` if it stays positive throughout."""
    grid = np.linspace(bracket[0], bracket[1], samples)
    for g in grid:
        if entanglement_after_probe(r, g) <= 0.0:
            return float(g)
    return None


def cat_qubit_basis(alpha: complex, cutoff: int) -> np.ndarray:
    """Orthonormal columns ``(down, up)`` built from the even and odd cats;
    they tend to ``|-alpha>`` and ``|alpha>`` as the overlap vanishes."""
    plus = fock.coherent_amplitudes(alpha, cutoff)
    minus = fock.coherent_amplitudes(-alpha, cutoff)
    even = plus + minus
    odd = plus - minus
    even /= np.linalg.norm(even)
    odd /= np.linalg.norm(odd)
    s = 1 / math.sqrt(2)
    return np.stack([s * (even - odd), s * (even + odd)], axis=1)


def qubit_reading(rho: DensityMatrix, alpha: complex) -> tuple[np.ndarray, float]:
    """Compress a two-mode Fock state to the cat-qubit pair; returns the 4x4
    matrix (basis dd, du, ud, uu) and the weight lost outside the span."""
    c0, c1 = rho.modes.cutoffs
    V = np.kron(cat_qubit_basis(alpha, c0), cat_qubit_basis(alpha, c1))
    q = V.conj().T @ rho.matrix @ V
    tr = rho.trace
    return q / tr, float(max(0.0, 1 - np.trace(q).real / tr))


def bell_reading(rho: DensityMatrix, alpha: complex) -> tuple[BellMixture, float]:
    """Bell weights of the compressed state (off-diagonal Bell coherences are dropped)."""
    q, leak = qubit_reading(rho, alpha)
    B = np.array(bell_vectors())
    w = np.clip(np.einsum("ai,ij,aj->a", B.conj(), q, B).real, 0, None)
    return BellMixture(tuple(w / w.sum())), leak


# --------------------------------------------------------------------------- the trade-off


def state_deviation(gamma: complex) -> float:
    """``(1 - C(2|gamma|^2))^2``."""
    return (1 - cosh_weight(2 * abs(gamma) ** 2)) ** 2


def state_deviation_small(gamma: complex) -> float:
    return 4 * abs(gamma) ** 4


def tradeoff_product(gamma: complex, M: float) -> float:
    return state_deviation(gamma) * contrast_uncertainty(gamma, M)


def loglog_slope(xs, ys) -> float:
    slope, _ = np.polyfit(np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float)), 1)
    return float(slope)


# --------------------------------------------------------------------------- complementarity


@dataclass(frozen=True)
class ComplementarityReport:
    alpha: complex
    fock: dict[str, float]
    qubit: dict[str, float]

    def rows(self) -> list[tuple[str, float, float]]:
        return [(k, self.fock[k], self.qubit[k]) for k in self.fock]


def _dephase_mode1(rho: DensityMatrix, weight: float) -> DensityMatrix:
    c0, c1 = rho.modes.cutoffs
    p1 = np.kron(np.ones(c0 + 1), fock.parity_diag(c1))
    flipped = p1[:, None] * rho.matrix * p1[None, :]
    return DensityMatrix(rho.modes, (1 - weight) * rho.matrix + weight * flipped)


def complementarity_demo(alpha: complex, cutoff: int | None = None) -> ComplementarityReport:
    """Mutual information (bits) between the two signal modes with neither, one,
    or both decoherence mechanisms at full strength: loss sends ``r`` to 0,
    dephasing applies the probe back-action at ``C = S = 1/2``."""
    cases = {"none": (1.0, 0.0), "loss": (0.0, 0.0), "dephasing": (1.0, 0.5), "both": (0.0, 0.5)}
    fock_mi, qubit_mi = {}, {}
    for name, (r, s) in cases.items():
        rho = _dephase_mode1(to_density_matrix(ParamState.symmetric(alpha, r), cutoff), s)
        fock_mi[name] = fock.mutual_information(rho)
        c = 1 - s
        mix = BellMixture((c * (1 + r) / 2, c * (1 - r) / 2, s * (1 + r) / 2, s * (1 - r) / 2))
        qubit_mi[name] = qubit_mutual_information(mix.density())
    return ComplementarityReport(alpha, fock_mi, qubit_mi)


def entanglement_curve(rs) -> list[tuple[float, float]]:
    return [(float(r), entanglement_from_weight((1 + abs(r)) / 2)) for r in rs]
