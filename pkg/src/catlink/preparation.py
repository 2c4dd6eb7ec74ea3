"""Heralded preparation of the two-mode entangled coherent state.

Mode labels follow the setup: 0 and 1 are Alice's and Bob's signal modes,
2 and 3 carry the split single photon (or, for the third-party variant, the
probe coherent states), 4 and 5 are the local coherent references.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import fock
from .fock import ModeSpec, PureState

BALANCED = 1 / math.sqrt(2)
FIG1_HERALDS = (1, 1, 0, 0)  # photon counts in modes 2, 3, 4, 5
THIRD_PARTY_HERALDS = (1, 0)  # photon counts in modes 2, 3


@dataclass(frozen=True)
class PrepResult:
    state: PureState | None
    probability: float
    heralds: dict[int, int] = field(default_factory=dict)

    @property
    def succeeded(self) -> bool:
        return self.probability > 0.0


class _Labeled:
    """PureState whose axes carry physical mode labels."""

    def __init__(self, state: PureState, labels: list[int]):
        self.state = state
        self.labels = labels

    def ax(self, label: int) -> int:
        return self.labels.index(label)

    def attach(self, other: PureState, label: int) -> None:
        self.state = fock.product(self.state, other)
        self.labels = self.labels + [label]

    def bs(self, j: int, k: int, T: complex, R: complex) -> None:
        self.state = fock.apply_beam_splitter(self.state, self.ax(j), self.ax(k), T, R)

    def kerr(self, j: int, k: int) -> None:
        self.state = fock.apply_cross_kerr(self.state, self.ax(j), self.ax(k))

    def project(self, label: int, n: int) -> None:
        self.state, _ = fock.project_fock(self.state, self.ax(label), n)
        self.labels = [m for m in self.labels if m != label]


def _coherent_probability_weight(beta: complex) -> complex:
    """``<0|beta><1|beta>``."""
    return math.exp(-abs(beta) ** 2) * beta


def _check_pair(T: complex, R: complex) -> None:
    if abs(abs(T) ** 2 + abs(R) ** 2 - 1) > fock.TOL.norm:
        raise ValueError("|T|^2 + |R|^2 must equal 1")


def herald_circuit(
    signal: PureState,
    beta: complex,
    T: complex,
    R: complex,
    heralds: tuple[int, int, int, int] = FIG1_HERALDS,
    beta_cutoff: int | None = None,
) -> PureState:
    """Run the local-heralding circuit on a two-mode signal and return the
    unnormalized conditional signal state.

    Each ancilla pair is projected as soon as its beam splitter has acted.
    """
    _check_pair(T, R)
    h2, h3, h4, h5 = heralds
    bc = max(fock.default_cutoff(beta) if beta_cutoff is None else beta_cutoff, h2 + h4, h3 + h5, 1)
    c2, c3 = max(2, h2), max(2, h3)

    photon = fock.product(fock.fock_state(1, c2), fock.vacuum(c3))
    photon = fock.apply_beam_splitter(photon, 0, 1, BALANCED, -BALANCED)
    work = _Labeled(fock.product(signal, photon), [0, 1, 2, 3])
    work.kerr(0, 2)
    work.kerr(1, 3)

    work.attach(fock.coherent_state(beta, bc), 4)
    work.bs(2, 4, T, R)
    work.project(2, h2)
    work.project(4, h4)

    work.attach(fock.coherent_state(beta, bc), 5)
    work.bs(3, 5, T, R)
    work.project(3, h3)
    work.project(5, h5)
    return work.state


def third_party_circuit(
    signal: PureState,
    beta: complex,
    heralds: tuple[int, int] = THIRD_PARTY_HERALDS,
    beta_cutoff: int | None = None,
) -> PureState:
    """Probe both signal modes with ``|beta>``, recombine on ``U_23^dag`` and herald."""
    h2, h3 = heralds
    bc = max(fock.default_cutoff(beta) if beta_cutoff is None else beta_cutoff, h2 + h3)
    work = _Labeled(signal, [0, 1])
    work.attach(fock.coherent_state(beta, bc), 2)
    work.attach(fock.coherent_state(beta, bc), 3)
    work.kerr(0, 2)
    work.kerr(1, 3)
    # U(T, R)^dag = U(T*, -R); for T = -R = 1/sqrt2 this is T = R = 1/sqrt2
    work.bs(2, 3, BALANCED, BALANCED)
    work.project(2, h2)
    work.project(3, h3)
    return work.state


def entangled_cat_state(alpha: complex, cutoff: int) -> PureState:
    """``(|a,-a> + |-a,a>) / sqrt(2(1 + exp(-4|a|^2)))`` built directly."""
    plus = fock.coherent_state(alpha, cutoff).amplitudes
    minus = fock.coherent_state(-alpha, cutoff).amplitudes
    amps = np.multiply.outer(plus, minus) + np.multiply.outer(minus, plus)
    norm = math.sqrt(2 * (1 + math.exp(-4 * abs(alpha) ** 2)))
    return PureState(ModeSpec((cutoff, cutoff)), amps / norm)


def _signal_input(alpha: complex, cutoffs: ModeSpec | None) -> PureState:
    if cutoffs is None:
        c = fock.default_cutoff(alpha)
        cutoffs = ModeSpec((c, c))
    c0, c1 = cutoffs.cutoffs[:2]
    signal = fock.product(fock.coherent_state(alpha, c0), fock.coherent_state(alpha, c1))
    fock.warn_if_truncated(signal, "signal input")
    return signal


def _finish(branch: PureState, heralds: dict[int, int]) -> PrepResult:
    p = branch.norm2
    if p == 0.0:
        return PrepResult(None, 0.0, heralds)
    return PrepResult(branch.normalize(), p, heralds)


def prepare_entangled_cats(
    alpha: complex,
    beta: complex = BALANCED,
    T: complex = BALANCED,
    R: complex = BALANCED,
    cutoffs: ModeSpec | None = None,
    heralds: tuple[int, int, int, int] = FIG1_HERALDS,
) -> PrepResult:
    """Heralded preparation from ``|alpha>|alpha>`` by full Fock simulation of modes 0-5.

    ``cutoffs`` gives the signal-mode cutoffs (the first two entries are used);
    ancilla cutoffs follow from ``beta`` and the herald pattern.
    """
    branch = herald_circuit(_signal_input(alpha, cutoffs), beta, T, R, heralds)
    return _finish(branch, dict(zip((2, 3, 4, 5), heralds)))


def third_party_prepare(
    alpha: complex,
    beta: complex = BALANCED,
    cutoffs: ModeSpec | None = None,
    heralds: tuple[int, int] = THIRD_PARTY_HERALDS,
) -> PrepResult:
    branch = third_party_circuit(_signal_input(alpha, cutoffs), beta, heralds)
    return _finish(branch, dict(zip((2, 3), heralds)))


def success_probability(alpha: complex, beta: complex, T: complex, R: complex) -> float:
    """Closed-form herald probability ``|T R <0|b><1|b>|^2 (1 + exp(-4|a|^2))``."""
    w = abs(T * R * _coherent_probability_weight(beta)) ** 2
    return w * (1 + math.exp(-4 * abs(alpha) ** 2))


def p_max(alpha: complex) -> float:
    """Optimum of :func:`success_probability` at ``|T|^2 = |beta|^2 = 1/2``."""
    return (1 + math.exp(-4 * abs(alpha) ** 2)) / (8 * math.e)


def third_party_probability(alpha: complex, beta: complex) -> float:
    w = abs(_coherent_probability_weight(beta)) ** 2
    return w * (1 + math.exp(-4 * abs(alpha) ** 2))


def _basis_columns(cutoffs: ModeSpec, run) -> np.ndarray:
    """Matrix of the linear map ``run`` on two-mode states, column per Fock basis input."""
    c0, c1 = cutoffs.cutoffs[:2]
    d = (c0 + 1) * (c1 + 1)
    mat = np.zeros((d, d), dtype=complex)
    for n0 in range(c0 + 1):
        for n1 in range(c1 + 1):
            inp = fock.product(fock.fock_state(n0, c0), fock.fock_state(n1, c1))
            mat[:, n0 * (c1 + 1) + n1] = run(inp).vector()
    return mat


def conditional_operator_matrix(
    alpha_cutoff: ModeSpec,
    beta: complex = BALANCED,
    T: complex = BALANCED,
    R: complex = BALANCED,
    heralds: tuple[int, int, int, int] = FIG1_HERALDS,
) -> np.ndarray:
    """Conditional two-mode operator on the signal, contracted from the circuit."""
    return _basis_columns(alpha_cutoff, lambda s: herald_circuit(s, beta, T, R, heralds))


def third_party_operator_matrix(
    alpha_cutoff: ModeSpec,
    beta: complex = BALANCED,
    heralds: tuple[int, int] = THIRD_PARTY_HERALDS,
) -> np.ndarray:
    return _basis_columns(alpha_cutoff, lambda s: third_party_circuit(s, beta, heralds))


def conditional_operator_closed(
    alpha_cutoff: ModeSpec, beta: complex, T: complex, R: complex, third_party: bool = False
) -> np.ndarray:
    """Closed form ``c [(-1)^n0 + (-1)^n1] / sqrt2`` as a diagonal matrix."""
    c0, c1 = alpha_cutoff.cutoffs[:2]
    pref = _coherent_probability_weight(beta) / math.sqrt(2)
    if not third_party:
        pref *= T * R
    diag = np.add.outer(fock.parity_diag(c0), fock.parity_diag(c1)).reshape(-1)
    return np.diag(pref * diag)


def herald_distribution(
    alpha: complex,
    beta: complex,
    T: complex,
    R: complex,
    signal_cutoff: int,
    ancilla_cutoff: int,
) -> np.ndarray:
    """Probabilities of all herald patterns ``P[h2, h3, h4, h5]``.

    Only practical at small cutoffs; used to check that the branches add up.
    """
    sig = fock.product(fock.coherent_state(alpha, signal_cutoff), fock.coherent_state(alpha, signal_cutoff))
    ca = ancilla_cutoff
    photon = fock.product(fock.fock_state(1, ca + 1), fock.vacuum(ca + 1))
    photon = fock.apply_beam_splitter(photon, 0, 1, BALANCED, -BALANCED)
    st = fock.product(sig, photon)
    st = fock.apply_cross_kerr(st, 0, 2)
    st = fock.apply_cross_kerr(st, 1, 3)
    st = fock.product(st, fock.coherent_state(beta, ca))
    st = fock.apply_beam_splitter(st, 2, 4, T, R)  # axes 0,1,2,3,4 = modes 0,1,2,3,4
    out = np.zeros((ca + 2, ca + 2, ca + 1, ca + 1))
    for h2 in range(ca + 2):
        for h4 in range(ca + 1):
            part = np.take(np.take(st.amplitudes, h4, axis=4), h2, axis=2)  # modes 0,1,3
            if not np.any(part):
                continue
            sub = fock.product(PureState(ModeSpec((signal_cutoff, signal_cutoff, ca + 1)), part),
                               fock.coherent_state(beta, ca))
            sub = fock.apply_beam_splitter(sub, 2, 3, T, R)
            probs = (np.abs(sub.amplitudes) ** 2).sum(axis=(0, 1))
            out[h2, :, h4, :] = probs
    return out
