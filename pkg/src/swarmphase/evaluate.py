"""Trial running, sharpness estimation, exact sharpness, scaling fits.

Sharpness S of the error distribution is the magnitude of the mean error
phasor; the Holevo variance is V_H = S^-2 - 1.  Monte Carlo sharpness is
sampled over uniformly random true phases; the exact (noiseless, lossless)
value sums branch probabilities over all 2^N measurement histories with a
trigonometric-polynomial-exact quadrature over the true phase.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .channel import NoiseModel, RngStream
from .gls import GlsPolicy, wrap_angle
from .symstate import SymmetricState

EXACT_MAX_QUBITS = 20


@dataclass(frozen=True)
class TrialRecord:
    true_phi: float
    estimate: float
    error_sigma: float
    measured_count: int
    informative: bool = True


@dataclass(frozen=True)
class SharpnessEstimate:
    sharpness: float
    trials: int
    mean_count: int = 1

    def __post_init__(self):
        if not 0.0 <= self.sharpness <= 1.0 + 1e-12:
            raise ValueError(f"sharpness {self.sharpness} outside [0, 1]")

    @property
    def holevo_variance(self):
        return holevo_variance(self.sharpness)


def holevo_variance(sharpness):
    if sharpness <= 0.0:
        return math.inf
    return 1.0 / sharpness**2 - 1.0


@dataclass(frozen=True)
class ScalingFit:
    alpha: float
    alpha_stderr: float
    log_prefactor: float
    n_range: tuple


class SimulatorBackend:
    """Trial backend running batches on the symmetric-state simulator.

    The runner only needs `run_batch(policy, model, phis, stream)`; a
    hardware backend could implement the same surface.
    """

    def __init__(self, input_state: SymmetricState, kernel=None,
                 photon_indexed=False, threads=1):
        self.input_state = input_state
        self.kernel = kernel
        self.photon_indexed = photon_indexed
        self.threads = threads

    def run_batch(self, policy: GlsPolicy, model: NoiseModel, phis, stream: RngStream):
        """Returns (estimates, measured_counts, histories) for len(phis) trials."""
        gen = stream.generator
        n = self.input_state.n_qubits
        raws = kernels.draw_raws(model, len(phis), n, gen)
        if self.threads <= 1 or len(phis) < 4 * self.threads:
            return kernels.simulate_batch(
                policy.deltas, self.input_state.amplitudes, model, phis, None,
                backend=self.kernel, photon_indexed=self.photon_indexed, raws=raws)
        # Raw draws are pre-generated above, so chunked execution returns the
        # same trajectories for any thread count.
        bounds = np.linspace(0, len(phis), self.threads + 1, dtype=int)
        chunks = [
            (phis[a:b], tuple(r[a:b] for r in raws))
            for a, b in zip(bounds[:-1], bounds[1:]) if b > a
        ]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            parts = list(pool.map(
                lambda c: kernels.simulate_batch(
                    policy.deltas, self.input_state.amplitudes, model, c[0],
                    None, backend=self.kernel,
                    photon_indexed=self.photon_indexed, raws=c[1]),
                chunks))
        return tuple(np.concatenate([p[i] for p in parts]) for i in range(3))


def run_trial(policy: GlsPolicy, input_state: SymmetricState, model: NoiseModel,
              true_phi, rng: RngStream, **backend_kwargs) -> TrialRecord:
    """One end-to-end adaptive estimation trial."""
    if len(policy) < input_state.n_qubits:
        raise ValueError("policy shorter than the input state")
    backend = SimulatorBackend(input_state, **backend_kwargs)
    est, counts, _ = backend.run_batch(policy, model, np.array([true_phi]), rng)
    count = int(counts[0])
    return TrialRecord(
        true_phi=float(true_phi),
        estimate=float(est[0]),
        error_sigma=float(wrap_angle(true_phi - est[0])),
        measured_count=count,
        informative=count > 0,
    )


def sharpness_from_errors(errors) -> float:
    """|mean error phasor|, summed in index order for bit-stable results."""
    phasors = np.exp(1j * np.asarray(errors))
    return float(abs(np.add.reduce(phasors)) / len(phasors))


def sample_sharpness(policy: GlsPolicy, input_state: SymmetricState,
                     model: NoiseModel, trials: int, rng: RngStream,
                     backend: SimulatorBackend | None = None) -> SharpnessEstimate:
    """Monte Carlo sharpness over `trials` runs with uniform random phases.

    Trials with zero measurements contribute their (uninformative) default
    estimate; excluding them would bias the estimate under loss.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if backend is None:
        backend = SimulatorBackend(input_state)
    gen = rng.generator
    phis = gen.uniform(0.0, 2.0 * np.pi, trials)
    estimates, _, _ = backend.run_batch(policy, model, phis, rng)
    errors = wrap_angle(phis - estimates)
    return SharpnessEstimate(sharpness=sharpness_from_errors(errors),
                             trials=trials, mean_count=1)


def merge_sharpness(a: SharpnessEstimate, b: SharpnessEstimate) -> SharpnessEstimate:
    """Count-weighted running mean of sharpness samples of the same policy."""
    total = a.mean_count + b.mean_count
    mean = (a.sharpness * a.mean_count + b.sharpness * b.mean_count) / total
    return SharpnessEstimate(sharpness=mean, trials=a.trials + b.trials,
                             mean_count=total)


def exact_sharpness(policy: GlsPolicy, input_state: SymmetricState,
                    node_factor: int = 4) -> float:
    """Exact sharpness for the noiseless, lossless channel (cost ~2^N).

    S = |(1/2pi) int dphi sum_h P(h|phi) e^{i(phi - est(h))}|.  The history
    sum runs over the full depth-N binary tree with unnormalized branch
    amplitudes; the phi integral uses equidistant trapezoid quadrature with
    node_factor*(N+2) nodes, exact because the integrand is a trigonometric
    polynomial of degree <= N+1.
    """
    n_qubits = input_state.n_qubits
    if n_qubits > EXACT_MAX_QUBITS:
        raise ValueError(f"exact sharpness refused for N > {EXACT_MAX_QUBITS}")
    if len(policy) < n_qubits:
        raise ValueError("policy shorter than the input state")
    n_nodes = node_factor * (n_qubits + 2)
    phis = 2.0 * np.pi * np.arange(n_nodes) / n_nodes
    sq = np.sqrt(np.arange(n_qubits + 1, dtype=np.float64))
    acc = np.zeros(n_nodes, dtype=np.complex128)

    # DFS over histories; amps has shape (n_nodes, n_remaining+1), unnormalized.
    def descend(amps, feedback, depth):
        n = n_qubits - depth
        if n == 0:
            prob = np.abs(amps[:, 0]) ** 2
            acc[:] += prob * np.exp(-1j * feedback)
            return
        v0 = amps[:, :n] * (sq[n:0:-1] / sq[n])
        v1 = amps[:, 1:n + 1] * (sq[1:n + 1] / sq[n])
        theta = (phis - feedback) * 0.5
        ct = np.cos(theta)[:, None]
        st = np.sin(theta)[:, None]
        delta = policy.deltas[depth]
        # axis (0,1,0): U = [[c, -s], [s, c]]
        descend(ct * v0 - st * v1, float(wrap_angle(feedback - delta)), depth + 1)
        descend(st * v0 + ct * v1, float(wrap_angle(feedback + delta)), depth + 1)

    amps0 = np.tile(input_state.amplitudes, (n_nodes, 1))
    descend(amps0, 0.0, 0)
    return float(abs(np.mean(np.exp(1j * phis) * acc)))


def fit_scaling(points) -> ScalingFit:
    """OLS fit of log V_H against log N; alpha is the negated slope."""
    pts = [(int(n), float(v)) for n, v in points]
    if len(pts) < 3:
        raise ValueError("need at least 3 points")
    if any(v <= 0 for _, v in pts):
        raise ValueError("all V_H values must be positive")
    x = np.log([n for n, _ in pts])
    y = np.log([v for _, v in pts])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    dof = len(pts) - 2
    sxx = float(np.sum((x - x.mean()) ** 2))
    stderr = float(np.sqrt(np.sum(resid**2) / dof / sxx)) if dof > 0 else 0.0
    return ScalingFit(
        alpha=float(-slope),
        alpha_stderr=stderr,
        log_prefactor=float(intercept),
        n_range=(min(n for n, _ in pts), max(n for n, _ in pts)),
    )
