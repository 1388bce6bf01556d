"""Permutationally symmetric N-qubit pure states.

A state is stored as the N+1 complex amplitudes of the occupation basis
``|n>_[N]`` (n qubits in |1>, N-n in |0>).  This keeps photon-by-photon
simulation of an N-qubit input at O(N^2) total cost instead of 2^N.
"""

from dataclasses import dataclass
from math import lgamma, cos, sin, pi

import numpy as np

NORM_TOL = 1e-10
DEGENERATE_BRANCH = 1e-15


class DegenerateBranchError(ValueError):
    """Requested a measurement branch whose probability is ~0."""


@dataclass(frozen=True)
class SymmetricState:
    n_qubits: int
    amplitudes: np.ndarray  # complex, length n_qubits + 1

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        if self.n_qubits < 0:
            raise ValueError("n_qubits must be nonnegative")
        if amps.shape != (self.n_qubits + 1,):
            raise ValueError(
                f"expected {self.n_qubits + 1} amplitudes, got {amps.shape}"
            )

    @property
    def norm_sq(self):
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def check_normalized(self, tol=NORM_TOL):
        if abs(self.norm_sq - 1.0) > tol:
            raise ValueError(f"state not normalized: |psi|^2 = {self.norm_sq}")
        return self


@dataclass(frozen=True)
class ExtractionResult:
    """One qubit split off a symmetric state.

    The source state equals amp0*|0>@rest0 + amp1*|1>@rest1, with amp0/amp1
    real nonnegative and the branch phases carried by rest0/rest1.
    """

    amp0: complex
    amp1: complex
    rest0: SymmetricState
    rest1: SymmetricState


@dataclass(frozen=True)
class WignerDArgs:
    j: float
    nu: float
    mu: float
    beta: float

    def __post_init__(self):
        for name, value in (("2j", 2 * self.j), ("j+nu", self.j + self.nu),
                            ("j-nu", self.j - self.nu), ("j+mu", self.j + self.mu),
                            ("j-mu", self.j - self.mu)):
            rounded = round(value)
            if abs(value - rounded) > 1e-9 or rounded < 0:
                raise ValueError(f"{name} = {value} is not a nonnegative integer")


def _lfact(n: int) -> float:
    return lgamma(n + 1)


def wigner_d(args: WignerDArgs) -> float:
    """Small Wigner d-matrix element d^j_{nu,mu}(beta).

    Explicit factorial-sum formula evaluated with log-factorials, stable up
    to j of a few hundred.
    """
    j, nu, mu, beta = args.j, args.nu, args.mu, args.beta
    jpm = round(j + mu)
    jmm = round(j - mu)
    jpn = round(j + nu)
    jmn = round(j - nu)
    prefactor_log = 0.5 * (_lfact(jpm) + _lfact(jmm) + _lfact(jpn) + _lfact(jmn))

    c = cos(beta / 2.0)
    s = sin(beta / 2.0)
    k_min = max(0, round(mu - nu))
    k_max = min(jpm, jmn)
    total = 0.0
    for k in range(k_min, k_max + 1):
        # term: (-1)^(nu-mu+k) c^(2j+mu-nu-2k) s^(nu-mu+2k) / [(j+mu-k)! k! (j-nu-k)! (nu-mu+k)!]
        denom_log = (_lfact(jpm - k) + _lfact(k) + _lfact(jmn - k)
                     + _lfact(round(nu - mu) + k))
        c_exp = round(2 * j + mu - nu) - 2 * k
        s_exp = round(nu - mu) + 2 * k
        if c == 0.0 and c_exp == 0:
            c_term = 1.0
        else:
            c_term = c ** c_exp
        if s == 0.0 and s_exp == 0:
            s_term = 1.0
        else:
            s_term = s ** s_exp
        sign = -1.0 if (round(nu - mu) + k) % 2 else 1.0
        total += sign * np.exp(prefactor_log - denom_log) * c_term * s_term
    return float(total)


def make_optimal_input_state(n_qubits: int) -> SymmetricState:
    """Sine-profile entangled input state giving near-Heisenberg precision.

    amplitudes[n] = sum_k sin((k+1)pi/(N+2))/sqrt(1+N/2)
                    * exp(i pi (k-n)/2) * d^{N/2}_{n-N/2, k-N/2}(pi/2)
    """
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    big_n = n_qubits
    j = big_n / 2.0
    amps = np.zeros(big_n + 1, dtype=np.complex128)
    norm = np.sqrt(1.0 + big_n / 2.0)
    for n in range(big_n + 1):
        acc = 0.0 + 0.0j
        for k in range(big_n + 1):
            weight = sin((k + 1) * pi / (big_n + 2)) / norm
            phase = np.exp(1j * pi * (k - n) / 2.0)
            d = wigner_d(WignerDArgs(j, n - j, k - j, pi / 2.0))
            acc += weight * phase * d
        amps[n] = acc
    state = SymmetricState(big_n, amps)
    state.check_normalized()
    return state


def make_product_zero_state(n_qubits: int) -> SymmetricState:
    """|00...0> in the symmetric representation: (1, 0, ..., 0)."""
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    amps = np.zeros(n_qubits + 1, dtype=np.complex128)
    amps[0] = 1.0
    return SymmetricState(n_qubits, amps)


def branch_vectors(state: SymmetricState):
    """Unnormalized (N-1)-qubit branch amplitude vectors (v0, v1).

    |n>_[N] = sqrt(n/N)|1>|n-1>_[N-1] + sqrt((N-n)/N)|0>|n>_[N-1], so the
    |0>-branch picks up c_m*sqrt((N-m)/N) and the |1>-branch c_{m+1}*sqrt((m+1)/N).
    """
    big_n = state.n_qubits
    if big_n < 1:
        raise ValueError("cannot extract a qubit from a zero-qubit state")
    c = state.amplitudes
    m = np.arange(big_n)
    v0 = c[:big_n] * np.sqrt((big_n - m) / big_n)
    v1 = c[1:] * np.sqrt((m + 1) / big_n)
    return v0, v1


def extract_one_qubit(state: SymmetricState) -> ExtractionResult:
    """Split one qubit off: state -> amp0*|0>@rest0 + amp1*|1>@rest1."""
    v0, v1 = branch_vectors(state)
    big_n = state.n_qubits
    a0 = float(np.sqrt(np.sum(np.abs(v0) ** 2)))
    a1 = float(np.sqrt(np.sum(np.abs(v1) ** 2)))
    rest0 = v0 / a0 if a0 > DEGENERATE_BRANCH else _unit_vector(big_n)
    rest1 = v1 / a1 if a1 > DEGENERATE_BRANCH else _unit_vector(big_n)
    return ExtractionResult(
        amp0=a0,
        amp1=a1,
        rest0=SymmetricState(big_n - 1, rest0),
        rest1=SymmetricState(big_n - 1, rest1),
    )


def _unit_vector(length):
    v = np.zeros(length, dtype=np.complex128)
    v[0] = 1.0
    return v


def collapse(extraction: ExtractionResult, rotated_branch_amps, outcome: int):
    """Project the rotated extracted qubit onto |outcome> and renormalize.

    rotated_branch_amps is the 2x2 single-qubit unitary already applied to
    the extracted-qubit subspace; row u gives the amplitude pattern of
    outcome u over the (|0>, |1>) branches.
    """
    u_mat = np.asarray(rotated_branch_amps, dtype=np.complex128)
    if u_mat.shape != (2, 2):
        raise ValueError("rotated_branch_amps must be 2x2")
    if outcome not in (0, 1):
        raise ValueError("outcome must be 0 or 1")
    w = (u_mat[outcome, 0] * extraction.amp0 * extraction.rest0.amplitudes
         + u_mat[outcome, 1] * extraction.amp1 * extraction.rest1.amplitudes)
    prob = float(np.sum(np.abs(w) ** 2))
    if prob < DEGENERATE_BRANCH:
        raise DegenerateBranchError(
            f"outcome {outcome} has probability {prob}; sample from the "
            "returned distribution instead of forcing this branch"
        )
    post = SymmetricState(extraction.rest0.n_qubits, w / np.sqrt(prob))
    return prob, post
