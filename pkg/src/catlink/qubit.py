"""Two-qubit picture of the cat pair: Bell mixtures, entanglement of formation,
the bilateral purification gate and random walks of the purity parameter.

Qubit basis per side: index 0 = down (amplitude ``-alpha``), 1 = up (``+alpha``).
Bell mixtures list weights in the order (Psi+, Psi-, Phi+, Phi-).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import solve_banded

from .fock import von_neumann_entropy

BELL_LABELS = ("psi+", "psi-", "phi+", "phi-")
DOWN, UP = 0, 1

WALK_CHUNK = 256


class ZeroProbabilityBranch(ValueError):
    """The requested measurement branch has probability zero."""


class NonConvergenceError(RuntimeError):
    def __init__(self, message: str, unconverged: int = 0):
        super().__init__(message)
        self.unconverged = unconverged


@dataclass(frozen=True)
class BellMixture:
    weights: tuple[float, float, float, float]

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        if len(w) != 4:
            raise ValueError("a Bell mixture has four weights")
        if min(w) < -1e-12 or abs(sum(w) - 1) > 1e-12:
            raise ValueError(f"weights must be nonnegative and sum to 1, got {w}")
        object.__setattr__(self, "weights", w)

    @property
    def psi_plus(self) -> float:
        return self.weights[0]

    def swapped(self) -> "BellMixture":
        """Exchange the Psi and Phi families."""
        w = self.weights
        return BellMixture((w[2], w[3], w[0], w[1]))

    def density(self) -> np.ndarray:
        return sum(w * np.outer(b, b.conj()) for w, b in zip(self.weights, bell_vectors()))

    @classmethod
    def from_density(cls, rho: np.ndarray, tol: float = 1e-9) -> "BellMixture":
        B = np.array(bell_vectors())
        m = B.conj() @ rho @ B.T
        off = m - np.diag(np.diag(m))
        if np.abs(off).max() > tol:
            raise ValueError("state is not Bell diagonal")
        w = np.clip(np.diag(m).real, 0.0, None)
        return cls(tuple(w / w.sum()))


def bell_vectors() -> list[np.ndarray]:
    up = np.array([0.0, 1.0])
    dn = np.array([1.0, 0.0])
    ud, du = np.kron(up, dn), np.kron(dn, up)
    uu, dd = np.kron(up, up), np.kron(dn, dn)
    s = 1 / math.sqrt(2)
    return [s * (ud + du), s * (ud - du), s * (uu + dd), s * (uu - dd)]


def bell_mixture_from_purity(r: float) -> BellMixture:
    if abs(r) > 1:
        raise ValueError(f"|r| must be <= 1, got {r}")
    return BellMixture(((1 + r) / 2, (1 - r) / 2, 0.0, 0.0))


def entanglement_from_weight(p: float) -> float:
    """Entanglement of formation of a Bell-diagonal state with largest weight ``p``."""
    p = max(0.5, min(1.0, p))
    root = math.sqrt(max(0.0, p * (1 - p)))
    out = 0.0
    for x in (0.5 + root, 0.5 - root):
        if x > 0:
            out -= x * math.log2(x)
    return out


def entanglement_of_formation(mix: BellMixture) -> float:
    return entanglement_from_weight(max(mix.weights))


def mutual_information(rho: np.ndarray) -> float:
    """Quantum mutual information (bits) of a two-qubit density matrix."""
    t = rho.reshape(2, 2, 2, 2)
    ra = np.einsum("ijkj->ik", t)
    rb = np.einsum("ijil->jl", t)
    return von_neumann_entropy(ra) + von_neumann_entropy(rb) - von_neumann_entropy(rho)


# --------------------------------------------------------------------------- the recursion


def purification_step(R_prev: float, r: float, same_outcome: bool) -> tuple[float, float]:
    """One round: ``R -> (R +- r) / (1 +- r R)`` with probability ``(1 +- r R) / 2``."""
    s = 1.0 if same_outcome else -1.0
    den = 1 + s * r * R_prev
    if den == 0:
        raise ZeroProbabilityBranch(f"branch {'+' if same_outcome else '-'} has zero probability")
    return (R_prev + s * r) / den, den / 2


def variance_increment(R: float, r: float) -> float:
    return r * r * (1 - R * R) ** 2 / (1 - r * r * R * R)


# --------------------------------------------------------------------------- the gate


def gate_matrix() -> np.ndarray:
    """Two-qubit gate on (signal, fresh) in the basis dd, du, ud, uu (column convention)."""
    rows = np.array([[1, 1, 0, 0], [0, 0, 1, -1], [0, 0, 1, 1], [1, -1, 0, 0]]) / math.sqrt(2)
    # rows give U|b_i> in terms of |b_j>; the matrix acting on amplitudes is its transpose
    return rows.T


def apply_gate_to_mixture(
    signal: BellMixture, fresh: BellMixture, outcome: tuple[int, int]
) -> tuple[BellMixture, float]:
    """Apply the gate on each side to (signal qubit, fresh qubit), read out the
    two fresh qubits as ``outcome`` (0 = down, 1 = up) and return the
    normalized signal mixture with the outcome probability.
    """
    G = gate_matrix().reshape(2, 2, 2, 2)
    # qubit axes: s0 s1 f0 f1, kets then bras
    rho = np.kron(signal.density(), fresh.density()).reshape([2] * 8)
    for s_ax, f_ax in ((0, 2), (1, 3)):
        rho = np.moveaxis(np.tensordot(G, rho, axes=([2, 3], [s_ax, f_ax])), (0, 1), (s_ax, f_ax))
        rho = np.moveaxis(
            np.tensordot(G.conj(), rho, axes=([2, 3], [4 + s_ax, 4 + f_ax])), (0, 1), (4 + s_ax, 4 + f_ax)
        )
    d0, d1 = outcome
    sub = rho[:, :, d0, d1, :, :, d0, d1].reshape(4, 4)
    prob = float(np.trace(sub).real)
    if prob <= 1e-15:
        raise ZeroProbabilityBranch(f"outcome {outcome} has zero probability")
    return BellMixture.from_density(sub / prob), prob


def averaged_gate_output(signal: BellMixture, fresh: BellMixture) -> BellMixture:
    """Signal mixture averaged over all four read-outs."""
    acc = np.zeros(4)
    for outcome in itertools.product((DOWN, UP), repeat=2):
        try:
            mix, p = apply_gate_to_mixture(signal, fresh, outcome)
        except ZeroProbabilityBranch:
            continue
        acc += p * np.array(mix.weights)
    return BellMixture(tuple(acc / acc.sum()))


# --------------------------------------------------------------------------- random walks


def seed_sequence(seed: int | np.random.SeedSequence) -> np.random.SeedSequence:
    return seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)


class UniformStream:
    """Per-walk uniform variates, drawn in fixed-size chunks so that a walk run
    alone and the same walk inside a vectorized ensemble see identical numbers.
    """

    def __init__(self, seed: int | np.random.SeedSequence, chunk: int = WALK_CHUNK):
        self._gen = np.random.Generator(np.random.PCG64(seed_sequence(seed)))
        self._chunk = chunk
        self._buf = np.empty(0)
        self._pos = 0

    def next_chunk(self) -> np.ndarray:
        return self._gen.random(self._chunk)

    def __call__(self) -> float:
        if self._pos == self._buf.size:
            self._buf = self.next_chunk()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return float(u)


@dataclass
class PurityWalk:
    r: float
    start: float
    trajectory: list[tuple[float, int, float]] = field(default_factory=list)
    seed: object = None
    converged: bool = False
    outcomes: list[tuple[int, int, int, int]] | None = None

    @property
    def steps(self) -> int:
        return len(self.trajectory)

    @property
    def values(self) -> list[float]:
        return [self.start] + [t[0] for t in self.trajectory]

    @property
    def final(self) -> float:
        return self.values[-1]

    @property
    def limit_sign(self) -> int:
        return 1 if self.final > 0 else -1

    def last_probabilities(self) -> tuple[float, float]:
        """``(p+, p-)`` for the next step; ``p+ > p-`` flags a positive limit."""
        p_plus = (1 + self.r * self.final) / 2
        return p_plus, 1 - p_plus


def _done(R: float | np.ndarray, epsilon: float):
    return 1 - np.abs(R) < epsilon


def run_walk(
    r: float,
    epsilon: float,
    max_steps: int = 1_000_000,
    seed: int | np.random.SeedSequence = 0,
    start: float | None = None,
) -> PurityWalk:
    """Monitored free run: sample the branch from ``p+-``, update, stop once
    ``1 - |R_n| < epsilon``. ``start`` defaults to ``r`` (both pulses alike).
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if abs(r) > 1:
        raise ValueError("|r| must be <= 1")
    R = r if start is None else start
    walk = PurityWalk(r=r, start=R, seed=seed)
    draw = UniformStream(seed)
    while not _done(R, epsilon):
        if walk.steps >= max_steps:
            return walk
        p_plus = (1 + r * R) / 2
        same = draw() < p_plus
        R, prob = purification_step(R, r, same)
        walk.trajectory.append((R, 1 if same else -1, prob))
    walk.converged = True
    return walk


def walk_lengths(
    r: float,
    epsilon: float,
    trials: int,
    seed: int | np.random.SeedSequence = 0,
    max_steps: int = 1_000_000,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized ensemble of walks; trial ``i`` uses the ``i``-th spawned stream.

    Returns stopping steps, final purities and a converged mask.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    streams = [UniformStream(s) for s in seed_sequence(seed).spawn(trials)]
    R = np.full(trials, float(r))
    steps = np.zeros(trials, dtype=np.int64)
    active = np.nonzero(~_done(R, epsilon))[0]
    buf = np.empty((trials, WALK_CHUNK))
    n = 0
    while active.size and n < max_steps:
        col = n % WALK_CHUNK
        if col == 0:
            for i in active:
                buf[i] = streams[i].next_chunk()
        n += 1
        Ra = R[active]
        plus = buf[active, col] < (1 + r * Ra) / 2
        R[active] = np.where(plus, (Ra + r) / (1 + r * Ra), (Ra - r) / (1 - r * Ra))
        steps[active] = n
        active = active[~_done(R[active], epsilon)]
    converged = _done(R, epsilon)
    return steps, R, converged


def mean_steps(
    r: float,
    epsilon: float,
    trials: int,
    seed: int | np.random.SeedSequence = 0,
    max_steps: int = 1_000_000,
) -> tuple[float, float]:
    """Monte Carlo mean stopping time and its standard error."""
    steps, _, converged = walk_lengths(r, epsilon, trials, seed, max_steps)
    if not converged.all():
        raise NonConvergenceError(
            f"{int((~converged).sum())} of {trials} walks hit max_steps={max_steps}",
            unconverged=int((~converged).sum()),
        )
    stderr = float(steps.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.nan
    return float(steps.mean()), stderr


def expected_steps_exact(r: float, epsilon: float) -> float:
    """Exact mean stopping time via the rapidity lattice.

    With ``R = tanh(theta)`` and ``r = tanh(phi)`` the update is
    ``theta -> theta +- phi``, so the walk lives on ``theta = m phi`` and the
    mean exit time solves a tridiagonal linear system.
    """
    if abs(r) >= 1:
        return 0.0
    if r == 0:
        return math.inf
    phi = math.atanh(abs(r))
    # transient sites: 1 - tanh(|m| phi) >= epsilon
    M = 0
    while 1 - math.tanh((M + 1) * phi) >= epsilon:
        M += 1
    if 1 - math.tanh(phi) < epsilon:
        return 0.0
    sites = np.arange(-M, M + 1)
    th = np.tanh(sites * phi)
    tr = math.tanh(phi)
    up = (1 + tr * th) / 2
    down = 1 - up
    size = sites.size
    # E_m - up_m E_{m+1} - down_m E_{m-1} = 1 with E = 0 outside the transient range
    ab = np.zeros((3, size))
    ab[1] = 1.0
    ab[0, 1:] = -up[:-1]
    ab[2, :-1] = -down[1:]
    E = solve_banded((1, 1), ab, np.ones(size))
    return float(E[M + 1])  # start at theta = phi, i.e. m = 1


def limit_plus_probability(r: float) -> float:
    return (1 + r) / 2
