"""Fock-level purification hardware.

Each side runs one device: the stored signal mode (0 for Claire, 1 for Denis)
couples through a single-photon Mach-Zehnder interferometer (modes 4, 6) to
the corresponding mode of a fresh pulse (mode 2), whose sign is then read by
mixing with a coherent reference in mode 8 and an ON/OFF detector.

All device operators are diagonal in the signal photon number and depend on
it only through its parity. The effect of one device on the signal is then a
Hadamard product with a 2x2 parity kernel, which keeps the two-mode state in
factored :class:`~catlink.fock.KronSum` form.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import numpy as np

from . import fock, preparation
from .channel import FitResult, ParamState, fit_param_state, to_kron_sum
from .fock import KronSum, ModeSpec
from .qubit import (
    NonConvergenceError,
    PurityWalk,
    UniformStream,
    ZeroProbabilityBranch,
    run_walk,
    seed_sequence,
)

Discriminator = Literal["onoff", "projective"]
PHOTON_CUTOFF = 2
SMALL_OVERLAP = 1e-3  # warn when exp(-|alpha|^2) exceeds this


@dataclass(frozen=True, order=True)
class DeviceOutcome:
    j0: int
    k0: int
    j1: int
    k1: int

    def __post_init__(self):
        if any(b not in (0, 1) for b in (self.j0, self.k0, self.j1, self.k1)):
            raise ValueError("device outcomes are bits")

    @property
    def sign(self) -> int:
        """+1 when ``j0 + j1`` is even."""
        return 1 if (self.j0 + self.j1) % 2 == 0 else -1


def all_outcomes() -> list[DeviceOutcome]:
    """The 16 outcomes, even ``j0 + j1`` first."""
    outs = [DeviceOutcome(j0, k0, j1, k1) for j0 in (0, 1) for k0 in (0, 1) for j1 in (0, 1) for k1 in (0, 1)]
    return sorted(outs, key=lambda o: (o.sign < 0, o))


# --------------------------------------------------------------------------- single device


def _interferometer_output(n0: int, mode2_input: np.ndarray, j: int) -> np.ndarray:
    """Mode-2 vector after the interferometer with the photon found in mode 4 (``j = 1``)
    or mode 6 (``j = 0``), for signal photon number ``n0``.

    Axes: 0 = signal, 1 = mode 2, 2 = mode 4, 3 = mode 6.
    """
    c2 = mode2_input.size - 1
    st = fock.product(
        fock.fock_state(n0, max(n0, 1)),
        fock.PureState(ModeSpec((c2,)), mode2_input),
        fock.fock_state(1, PHOTON_CUTOFF),
        fock.vacuum(PHOTON_CUTOFF),
    )
    s = preparation.BALANCED
    st = fock.apply_beam_splitter(st, 2, 3, s, -s)  # U_46
    st = fock.apply_cross_kerr(st, 0, 3)  # K_06
    st = fock.apply_cross_kerr(st, 1, 2)  # K_24
    st = fock.apply_beam_splitter(st, 3, 2, s, s)  # U_64
    st, _ = fock.project_fock(st, 3, 1 - j)
    st, _ = fock.project_fock(st, 2, j)
    st, _ = fock.project_fock(st, 0, n0)
    return st.amplitudes


def _discriminate(vec: np.ndarray, alpha: complex, k: int, cutoff: int) -> np.ndarray:
    """Environment amplitudes after mixing mode 2 with ``|alpha>`` on ``U_28`` and
    reading the ON/OFF detector in mode 8 (``k = 1`` is a click)."""
    v = np.zeros(cutoff + 1, dtype=complex)
    v[: vec.size] = vec[: cutoff + 1]
    st = fock.product(fock.PureState(ModeSpec((cutoff,)), v), fock.coherent_state(alpha, cutoff))
    s = preparation.BALANCED
    st = fock.apply_beam_splitter(st, 0, 1, s, s)
    amps = st.amplitudes
    return amps[:, 0].copy() if k == 0 else amps[:, 1:].reshape(-1)


def _discriminator_cutoff(alpha: complex) -> int:
    return fock.default_cutoff(math.sqrt(2) * abs(alpha))


@lru_cache(maxsize=256)
def _environment_amplitudes(
    alpha: complex, mode2_amplitude: complex, j: int, k: int, discriminator: Discriminator
) -> tuple[np.ndarray, np.ndarray]:
    """``W[parity]``: environment amplitudes for even and odd signal photon numbers."""
    c8 = _discriminator_cutoff(alpha)
    inp = fock.coherent_amplitudes(mode2_amplitude, c8)
    out = []
    for n0 in (0, 1):
        vec = _interferometer_output(n0, inp, j)
        if discriminator == "projective":
            ref = fock.coherent_amplitudes((-1) ** k * alpha, c8)
            out.append(np.array([np.vdot(ref, vec)]))
        else:
            out.append(_discriminate(vec, alpha, k, c8))
    return out[0], out[1]


def parity_kernel(
    alpha: complex, ket_amp: complex, bra_amp: complex, j: int, k: int, discriminator: Discriminator = "onoff"
) -> np.ndarray:
    """``G[p, p'] = sum_e W_ket[p, e] conj(W_bra[p', e])`` for signal parities ``p, p'``."""
    wk = _environment_amplitudes(complex(alpha), complex(ket_amp), j, k, discriminator)
    wb = _environment_amplitudes(complex(alpha), complex(bra_amp), j, k, discriminator)
    return np.array([[np.vdot(wb[q], wk[p]) for q in (0, 1)] for p in (0, 1)])


def _expand(kernel: np.ndarray, cutoff: int) -> np.ndarray:
    par = np.arange(cutoff + 1) % 2
    return kernel[np.ix_(par, par)]


def conditional_single_mode_op(sign: int, j: int, k: int, alpha: complex, cutoff: int) -> np.ndarray:
    """``Y_0(sign*alpha | j, k)`` contracted from the interferometer with the
    fresh mode projected onto ``<(-1)^k alpha|``; returned as a diagonal matrix."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    w_even, w_odd = _environment_amplitudes(complex(alpha), complex(sign * alpha), j, k, "projective")
    diag = np.where(np.arange(cutoff + 1) % 2 == 0, w_even[0], w_odd[0])
    return np.diag(diag)


def conditional_single_mode_closed(sign: int, j: int, k: int, alpha: complex, cutoff: int) -> np.ndarray:
    n = np.arange(cutoff + 1)
    a2 = abs(alpha) ** 2
    entry = 0.5 * (-1.0) ** (k * (n + j)) * math.exp(-a2) * (
        math.exp(sign * a2) * (-1.0) ** (n + j) + math.exp(-sign * a2)
    )
    return np.diag(entry.astype(complex))


def conditional_single_mode_large_alpha(sign: int, j: int, k: int, cutoff: int) -> np.ndarray:
    n = np.arange(cutoff + 1)
    return np.diag((0.5 * (-1.0) ** (k * (n + j)) * (-sign) ** (n + j)).astype(complex))


# --------------------------------------------------------------------------- the pair update


def phase_compensation(outcome: DeviceOutcome, c0: int, c1: int) -> tuple[np.ndarray, np.ndarray]:
    """Diagonals of ``(-1)^{k0 n0 + (1 - k1) n1}``."""
    return (
        fock.parity_diag(c0) ** outcome.k0,
        fock.parity_diag(c1) ** (1 - outcome.k1),
    )


def _fresh_terms(alpha: complex, fresh_r: float):
    """``(weight, (ket0, ket1), (bra0, bra1))`` mode-2/3 amplitudes of the fresh pulse."""
    fresh = ParamState.symmetric(alpha, fresh_r)
    n = fresh.normalization
    A = (alpha, -alpha)
    B = (-alpha, alpha)
    return ((1 / n, A, A), (1 / n, B, B), (fresh_r / n, A, B), (fresh_r / n, B, A))


def device_output(
    signal: KronSum,
    fresh_r: float,
    outcome: DeviceOutcome,
    alpha: complex,
    discriminator: Discriminator = "onoff",
    compensate: bool = True,
) -> KronSum:
    """Unnormalized signal state after both devices report ``outcome``; its trace
    is the outcome probability."""
    c0, c1 = signal.modes.cutoffs
    terms = []
    for w, ket, bra in _fresh_terms(alpha, fresh_r):
        g0 = _expand(parity_kernel(alpha, ket[0], bra[0], outcome.j0, outcome.k0, discriminator), c0)
        g1 = _expand(parity_kernel(alpha, ket[1], bra[1], outcome.j1, outcome.k1, discriminator), c1)
        for c, a, b in signal.terms:
            terms.append((c * w, a * g0, b * g1))
    out = KronSum(signal.modes, tuple(terms))
    if compensate:
        out = out.conjugate_diag(*phase_compensation(outcome, c0, c1))
    return out


def _check_alpha(alpha: complex) -> None:
    if math.exp(-abs(alpha) ** 2) > SMALL_OVERLAP:
        warnings.warn(
            f"exp(-|alpha|^2) = {math.exp(-abs(alpha) ** 2):.2e}: the two-qubit picture is only approximate",
            stacklevel=3,
        )


def purify_pair_fit(
    signal: ParamState,
    fresh_r: float,
    outcome: DeviceOutcome,
    alpha: complex,
    cutoff: int | None = None,
    discriminator: Discriminator = "onoff",
    compensate: bool = True,
    residual: bool = False,
) -> tuple[FitResult, float]:
    """Like :func:`purify_pair` but returns the full fit (with residual if asked)."""
    if abs(fresh_r) > 1:
        raise ValueError("|fresh_r| must be <= 1")
    _check_alpha(alpha)
    cutoff = signal.default_cutoff() if cutoff is None else cutoff
    out = device_output(to_kron_sum(signal, cutoff), fresh_r, outcome, alpha, discriminator, compensate)
    prob = out.trace
    if prob <= 1e-15:
        raise ZeroProbabilityBranch(f"device outcome {outcome} has zero probability")
    return fit_param_state(out, signal.base_alpha, residual=residual), prob


def purify_pair(
    signal: ParamState,
    fresh_r: float,
    outcome: DeviceOutcome,
    alpha: complex,
    cutoff: int | None = None,
    discriminator: Discriminator = "onoff",
) -> tuple[ParamState, float]:
    """Pairwise purification at Fock level: the stored pulse with purity ``R``
    meets a fresh pulse with purity ``fresh_r``; returns the phase-compensated
    output refitted to the family and the probability of ``outcome``."""
    fit, prob = purify_pair_fit(signal, fresh_r, outcome, alpha, cutoff, discriminator)
    return fit.state, prob


def qubit_pair_prediction(R: float, fresh_r: float, outcome: DeviceOutcome) -> tuple[float, float]:
    """Large-amplitude prediction ``(R', probability)`` for one outcome."""
    s = outcome.sign
    return (R + s * fresh_r) / (1 + s * fresh_r * R), (1 + s * fresh_r * R) / 16


class DeviceMap:
    """Precomputed Fock-level pair update for a fixed signal amplitude.

    The unnormalized device output is linear in the stored purity ``R``, so each
    outcome is summarized by the trace and the ``<a,-a|.|-a,a>`` coherence of the
    incoherent and coherent parts. ``update(R)`` then reproduces the fit of
    :func:`purify_pair` with amplitudes held at the input values, in constant time.
    """

    def __init__(
        self,
        alpha: complex,
        fresh_r: float,
        cutoff: int | None = None,
        discriminator: Discriminator = "onoff",
    ):
        _check_alpha(alpha)
        self.alpha = alpha
        self.fresh_r = fresh_r
        self.outcomes = all_outcomes()
        cutoff = fock.default_cutoff(alpha) if cutoff is None else cutoff
        self.overlap = math.exp(-4 * abs(alpha) ** 2)
        inc = to_kron_sum(ParamState.symmetric(alpha, 0.0), cutoff)
        pure = to_kron_sum(ParamState.symmetric(alpha, 1.0), cutoff)
        # unnormalized parts: rho(R) * N(R) = inc_part + R * coh_part
        inc_part = KronSum(inc.modes, tuple((c * 2, a, b) for c, a, b in inc.terms))
        coh_part = KronSum(
            pure.modes, tuple((c * 2 * (1 + self.overlap), a, b) for c, a, b in pure.terms[2:])
        )
        bra = fock.product(fock.coherent_state(alpha, cutoff), fock.coherent_state(-alpha, cutoff))
        ket = fock.product(fock.coherent_state(-alpha, cutoff), fock.coherent_state(alpha, cutoff))
        rows = []
        for o in self.outcomes:
            row = []
            for part in (inc_part, coh_part):
                out = device_output(part, fresh_r, o, alpha, discriminator)
                row += [out.trace, out.sandwich(bra, ket).real]
            rows.append(row)
        self._table = np.array(rows)  # columns: t_inc, s_inc, t_coh, s_coh

    def probabilities(self, R: float) -> np.ndarray:
        t = self._table[:, 0] + R * self._table[:, 2]
        return t / (2 * (1 + R * self.overlap))

    def update(self, R: float, index: int) -> tuple[float, float]:
        """``(R', probability)`` for outcome ``self.outcomes[index]``."""
        t_inc, s_inc, t_coh, s_coh = self._table[index]
        t = t_inc + R * t_coh
        if t <= 1e-15:
            raise ZeroProbabilityBranch(f"device outcome {self.outcomes[index]} has zero probability")
        c = (s_inc + R * s_coh) / t
        eps = self.overlap
        r_new = 2 * (c - eps) / (1 + eps * eps - 2 * c * eps)
        return float(np.clip(r_new, -1.0, 1.0)), t / (2 * (1 + R * eps))


# --------------------------------------------------------------------------- feedback loop


def feedback_loop(
    signal_r: float,
    fresh_r: float,
    epsilon: float,
    alpha: complex,
    seed: int | np.random.SeedSequence = 0,
    level: Literal["qubit", "fock"] = "qubit",
    max_steps: int = 1_000_000,
    device: DeviceMap | None = None,
) -> PurityWalk:
    """Recirculate the stored pulse against fresh pulses until ``1 - |R| < epsilon``.

    At qubit level this is :func:`~catlink.qubit.run_walk`. At Fock level the
    16 device outcomes are sampled from their exact probabilities, even-sign
    outcomes first, so one uniform per round decides the sign just as in the
    qubit walk.
    """
    if level == "qubit":
        return run_walk(fresh_r, epsilon, max_steps, seed, start=signal_r)
    if level != "fock":
        raise ValueError(f"unknown level {level!r}")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    device = DeviceMap(alpha, fresh_r) if device is None else device
    draw = UniformStream(seed)
    R = signal_r
    walk = PurityWalk(r=fresh_r, start=R, seed=seed, outcomes=[])
    while 1 - abs(R) >= epsilon:
        if walk.steps >= max_steps:
            return walk
        probs = device.probabilities(R)
        cum = np.cumsum(probs)
        idx = int(np.searchsorted(cum, draw() * cum[-1], side="right"))
        idx = min(idx, len(probs) - 1)
        R, p = device.update(R, idx)
        o = device.outcomes[idx]
        walk.trajectory.append((R, o.sign, p))
        walk.outcomes.append((o.j0, o.k0, o.j1, o.k1))
    walk.converged = True
    return walk


def thread_count() -> int:
    env = os.environ.get("CATLINK_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"CATLINK_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def feedback_ensemble(
    signal_r: float,
    fresh_r: float,
    epsilon: float,
    alpha: complex,
    trials: int,
    seed: int | np.random.SeedSequence = 0,
    level: Literal["qubit", "fock"] = "fock",
    max_steps: int = 1_000_000,
    threads: int | None = None,
) -> list[PurityWalk]:
    """Independent loops on spawned seed streams; order of results follows the streams."""
    device = DeviceMap(alpha, fresh_r) if level == "fock" else None
    seeds = seed_sequence(seed).spawn(trials)

    def one(s):
        return feedback_loop(signal_r, fresh_r, epsilon, alpha, s, level, max_steps, device)

    threads = thread_count() if threads is None else threads
    if threads <= 1:
        walks = [one(s) for s in seeds]
    else:
        with ThreadPoolExecutor(threads) as pool:
            walks = list(pool.map(one, seeds))
    stuck = sum(not w.converged for w in walks)
    if stuck:
        raise NonConvergenceError(f"{stuck} of {trials} loops hit max_steps={max_steps}", stuck)
    return walks


# --------------------------------------------------------------------------- instant purification


def third_party_diagonal(cutoffs: ModeSpec, beta: complex) -> np.ndarray:
    """Diagonal of the third-party conditional operator, read off by feeding the
    uniform superposition of all basis states (valid because the operator is diagonal)."""
    c0, c1 = cutoffs.cutoffs[:2]
    ones = fock.PureState(ModeSpec((c0, c1)), np.ones((c0 + 1, c1 + 1), dtype=complex))
    return preparation.third_party_circuit(ones, beta).amplitudes


def instant_purify(
    signal: ParamState, beta: complex, alpha: complex | None = None, cutoff: int | None = None
) -> tuple[ParamState, float]:
    """Apply the third-party conditional operator to the mixed signal, undo the
    phase ``(-1)^{n1}`` and refit; returns the refitted state and the herald probability."""
    alpha = signal.alpha0 if alpha is None else alpha
    cutoff = signal.default_cutoff() if cutoff is None else cutoff
    diag = third_party_diagonal(ModeSpec((cutoff, cutoff)), beta)
    out = _conjugate_full_diag(to_kron_sum(signal, cutoff), diag)
    par1 = fock.parity_diag(cutoff)
    out = out.conjugate_diag(np.ones(cutoff + 1), par1)
    prob = out.trace
    if prob <= 1e-15:
        raise ZeroProbabilityBranch("third-party herald has zero probability")
    return fit_param_state(out, alpha, residual=False).state, prob


def _conjugate_full_diag(ks: KronSum, diag: np.ndarray) -> KronSum:
    """``D X D^dag`` for a diagonal ``D`` with parity structure, written as a
    sum of products ``D = sum_m u_m (x) v_m`` via SVD of the diagonal grid."""
    u, s, vh = np.linalg.svd(diag)
    keep = s > s[0] * 1e-14 if s.size and s[0] > 0 else np.zeros(0, bool)
    factors = [(s[i] * u[:, i], vh[i]) for i in np.nonzero(keep)[0]]
    terms = []
    for c, a, b in ks.terms:
        for d0, e0 in factors:
            for d1, e1 in factors:
                terms.append((c, d0[:, None] * a * d1.conj()[None, :], e0[:, None] * b * e1.conj()[None, :]))
    return KronSum(ks.modes, tuple(terms))


def instant_probability(alpha: complex, beta: complex, r: float) -> float:
    w = abs(math.exp(-abs(beta) ** 2) * beta) ** 2
    eps = math.exp(-4 * abs(alpha) ** 2)
    return w * (1 + r) * (1 + eps) / (1 + r * eps)
