"""Particle swarm optimizer over the GLS policy space.

Synchronous PSO with ring neighborhoods, velocity clamping, personal-best
resampling against a noisy objective (running-mean bookkeeping), and a
bootstrap initializer that seeds the N-qubit swarm near the best
(N-1)-qubit policy through truncated normals.
"""

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import erf
from scipy.stats import truncnorm

from .channel import NoiseModel, RngStream
from .evaluate import (SharpnessEstimate, SimulatorBackend, exact_sharpness,
                       merge_sharpness, sample_sharpness)
from .gls import GlsPolicy, wrap_angle
from .symstate import SymmetricState


@dataclass(frozen=True)
class PsoConfig:
    omega: float = 0.8          # velocity damping
    beta1: float = 0.5          # exploitation weight (personal best)
    beta2: float = 1.0          # exploration weight (neighborhood best)
    v_max: float = 0.2          # per-component clamp on applied displacement
    swarm_size: int | None = None       # default 20 N
    ring_radius: int = 1
    iterations: int = 300
    trials_per_eval: int | None = None  # default 10 N^2
    sigma1: float = 0.01 * math.pi      # bootstrap spread, inherited components
    sigma2: float = 0.25 * math.pi      # bootstrap spread, new component
    bootstrap_threshold: int = 10       # above this N, bootstrap is required
    per_component_xi: bool = False      # draw xi1/xi2 per component instead of scalar

    def __post_init__(self):
        if min(self.omega, self.beta1, self.beta2, self.v_max) <= 0:
            raise ValueError("omega, beta1, beta2, v_max must be > 0")
        if self.swarm_size is not None and self.swarm_size < 2:
            raise ValueError("swarm_size must be >= 2")
        if self.ring_radius < 1:
            raise ValueError("ring_radius must be >= 1")

    def resolved_swarm_size(self, n_qubits):
        return self.swarm_size if self.swarm_size is not None else 20 * n_qubits

    def resolved_trials(self, n_qubits):
        return (self.trials_per_eval if self.trials_per_eval is not None
                else 10 * n_qubits * n_qubits)

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d):
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    best_position: np.ndarray
    best_estimate: SharpnessEstimate | None = None


def ring_neighborhood(index, swarm_size, radius):
    """Indices within circular distance `radius` of `index`, self included."""
    if not 0 <= index < swarm_size:
        raise ValueError("index out of range")
    if radius >= (swarm_size + 1) // 2:
        warnings.warn("ring radius covers the whole swarm; degenerating to "
                      "global-best topology", stacklevel=2)
        return set(range(swarm_size))
    return {(index + d) % swarm_size for d in range(-radius, radius + 1)}


@dataclass(frozen=True)
class TruncatedNormalParams:
    """Normal density restricted to [0, pi) and renormalized."""
    mu: float
    sigma: float

    def normalization(self):
        # integral of exp(-(x-mu)^2 / 2 sigma^2) over [0, pi)
        s = self.sigma * math.sqrt(2.0)
        return (math.sqrt(math.pi / 2.0) * self.sigma
                * (erf((math.pi - self.mu) / s) + erf(self.mu / s)))

    def density(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= 0.0) & (x < math.pi)
        vals = np.exp(-((x - self.mu) ** 2) / (2.0 * self.sigma**2))
        return np.where(inside, vals / self.normalization(), 0.0)


_MAX_REJECTS = 10_000


def sample_truncated_normal(params: TruncatedNormalParams, rng: RngStream) -> float:
    """Draw from the [0, pi)-truncated normal.

    Rejection from the untruncated normal; if the acceptance region is so
    far in the tail that rejection stalls (mu well outside the support),
    falls back to scipy's truncated-normal sampler, which stays stable in
    extreme tails.
    """
    if params.sigma <= 0:
        raise ValueError("sigma must be > 0")
    gen = rng.generator
    for _ in range(_MAX_REJECTS):
        x = gen.normal(params.mu, params.sigma)
        if 0.0 <= x < math.pi:
            return float(x)
    a = (0.0 - params.mu) / params.sigma
    b = (math.pi - params.mu) / params.sigma
    return float(truncnorm.rvs(a, b, loc=params.mu, scale=params.sigma,
                               random_state=gen))


def bootstrap_init(prev_policy: GlsPolicy, config: PsoConfig, rng: RngStream) -> np.ndarray:
    """Starting position in P_N seeded from the best (N-1)-qubit policy.

    Components 1..N-1 follow truncated normals centered on the parent's
    entries with spread sigma1; the new component N is centered on the
    parent's final entry with the wider spread sigma2.
    """
    prev = prev_policy.deltas
    n = len(prev) + 1
    position = np.empty(n)
    for k in range(n - 1):
        position[k] = sample_truncated_normal(
            TruncatedNormalParams(float(prev[k]), config.sigma1), rng)
    position[n - 1] = sample_truncated_normal(
        TruncatedNormalParams(float(prev[-1]), config.sigma2), rng)
    return position


class EvalContext:
    """Shared evaluation setup for one optimization run.

    Every sharpness evaluation derives its RNG stream from
    (master key, iteration, particle, purpose), so results do not depend on
    scheduling.  evaluator="exact" swaps the Monte Carlo estimate for the
    exact noiseless sharpness (small N only).
    """

    PURPOSE_CURRENT = 0
    PURPOSE_BEST = 1
    PURPOSE_MOVE = 2

    def __init__(self, input_state: SymmetricState, model: NoiseModel,
                 trials: int, stream: RngStream, evaluator="sampled",
                 kernel=None, threads=1):
        self.input_state = input_state
        self.model = model
        self.trials = trials
        self.stream = stream
        self.evaluator = evaluator
        self.backend = SimulatorBackend(input_state, kernel=kernel, threads=threads)
        self.trials_run = 0

    def evaluate(self, position, iteration, particle, purpose) -> SharpnessEstimate:
        policy = GlsPolicy(position)
        if self.evaluator == "exact":
            return SharpnessEstimate(
                sharpness=exact_sharpness(policy, self.input_state),
                trials=0, mean_count=1)
        est = sample_sharpness(
            policy, self.input_state, self.model, self.trials,
            self.stream.derive(iteration, particle, purpose),
            backend=self.backend)
        self.trials_run += self.trials
        return est


def _xi_pair(gen, n, per_component):
    if per_component:
        return gen.uniform(size=n), gen.uniform(size=n)
    return gen.uniform(), gen.uniform()


def step_swarm(swarm, config: PsoConfig, ctx: EvalContext, iteration: int):
    """One synchronous PSO round over all particles."""
    # (i) sample current positions, (ii) resample personal bests,
    # (iii) update personal bests
    for i, part in enumerate(swarm):
        current = ctx.evaluate(part.position, iteration, i, ctx.PURPOSE_CURRENT)
        best_sample = ctx.evaluate(part.best_position, iteration, i, ctx.PURPOSE_BEST)
        merged = (best_sample if part.best_estimate is None
                  else merge_sharpness(part.best_estimate, best_sample))
        if current.sharpness > merged.sharpness:
            part.best_position = part.position.copy()
            part.best_estimate = current
        else:
            part.best_estimate = merged

    # (iv)-(v) neighborhood bests after the barrier
    swarm_size = len(swarm)
    lambdas = []
    for i in range(swarm_size):
        hood = ring_neighborhood(i, swarm_size, config.ring_radius)
        best_j = min(hood)  # deterministic tie-break: lowest index
        for j in sorted(hood):
            if swarm[j].best_estimate.sharpness > swarm[best_j].best_estimate.sharpness:
                best_j = j
        lambdas.append(swarm[best_j].best_position.copy())

    # (vi) velocity update, clamped displacement, wrapped position
    n = len(swarm[0].position)
    for i, part in enumerate(swarm):
        gen = ctx.stream.derive(iteration, i, ctx.PURPOSE_MOVE).generator
        xi1, xi2 = _xi_pair(gen, n, config.per_component_xi)
        part.velocity = (part.velocity
                         + config.beta1 * xi1 * wrap_angle(part.best_position - part.position)
                         + config.beta2 * xi2 * wrap_angle(lambdas[i] - part.position))
        displacement = np.clip(config.omega * part.velocity,
                               -config.v_max, config.v_max)
        part.position = wrap_angle(part.position + displacement)
    return swarm


def init_swarm(n_qubits, config: PsoConfig, stream: RngStream,
               prev_policy: GlsPolicy | None):
    swarm_size = config.resolved_swarm_size(n_qubits)
    particles = []
    for i in range(swarm_size):
        init_stream = stream.derive("init", i)
        if n_qubits > config.bootstrap_threshold:
            if prev_policy is None:
                raise ValueError(
                    f"N={n_qubits} exceeds the from-scratch threshold "
                    f"{config.bootstrap_threshold}; an (N-1)-qubit policy is required")
            if len(prev_policy) != n_qubits - 1:
                raise ValueError("prev_policy must have length N-1")
            position = bootstrap_init(prev_policy, config, init_stream)
        else:
            position = init_stream.generator.uniform(-np.pi, np.pi, n_qubits)
        velocity = init_stream.generator.uniform(-config.v_max, config.v_max, n_qubits)
        particles.append(Particle(position=position, velocity=velocity,
                                  best_position=position.copy()))
    return particles


@dataclass(frozen=True)
class OptimizeResult:
    policy: GlsPolicy
    sharpness: SharpnessEstimate
    trials_run: int
    iterations: int


def optimize_policy(n_qubits, input_state: SymmetricState, model: NoiseModel,
                    config: PsoConfig, rng: RngStream,
                    prev_policy: GlsPolicy | None = None,
                    evaluator="sampled", kernel=None, threads=1,
                    progress=None) -> OptimizeResult:
    """Run the full PSO search and return the sharpest personal best."""
    if input_state.n_qubits != n_qubits:
        raise ValueError("input_state size does not match n_qubits")
    ctx = EvalContext(input_state, model,
                      config.resolved_trials(n_qubits), rng.derive("eval"),
                      evaluator=evaluator, kernel=kernel, threads=threads)
    swarm = init_swarm(n_qubits, config, rng.derive("swarm"), prev_policy)
    for it in range(config.iterations):
        step_swarm(swarm, config, ctx, it)
        if progress is not None:
            best = max(swarm, key=lambda p: p.best_estimate.sharpness)
            progress(it, best.best_estimate.sharpness)
    winner = swarm[0]
    for part in swarm[1:]:
        if part.best_estimate.sharpness > winner.best_estimate.sharpness:
            winner = part
    return OptimizeResult(policy=GlsPolicy(winner.best_position),
                          sharpness=winner.best_estimate,
                          trials_run=ctx.trials_run,
                          iterations=config.iterations)


@dataclass(frozen=True)
class SweepLevel:
    n_qubits: int
    policy: GlsPolicy
    sharpness: SharpnessEstimate
    restarts_used: int
    trials_run: int


class SweepAborted(RuntimeError):
    def __init__(self, message, partial):
        super().__init__(message)
        self.partial = partial


def sweep(n_min, n_max, state_factory, model: NoiseModel, config: PsoConfig,
          restarts, rng: RngStream, prev_policy: GlsPolicy | None = None,
          kernel=None, threads=1, on_level=None):
    """Chain optimizations from n_min to n_max, feeding each level's best
    policy into the next level's bootstrap.  Each level runs `restarts`
    independent searches and keeps the sharpest result."""
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    levels = []
    for n in range(n_min, n_max + 1):
        input_state = state_factory(n)
        best = None
        trials_total = 0
        failures = []
        for r in range(restarts):
            try:
                result = optimize_policy(
                    n, input_state, model, config, rng.derive(n, r),
                    prev_policy=prev_policy, kernel=kernel, threads=threads)
            except Exception as exc:  # keep going: independent restarts
                failures.append(exc)
                continue
            trials_total += result.trials_run
            if best is None or result.sharpness.sharpness > best.sharpness.sharpness:
                best = result
        if best is None:
            raise SweepAborted(
                f"all {restarts} restarts failed at N={n}: {failures[-1]}",
                partial=levels)
        level = SweepLevel(n_qubits=n, policy=best.policy,
                           sharpness=best.sharpness, restarts_used=restarts,
                           trials_run=trials_total)
        levels.append(level)
        if on_level is not None:
            on_level(level)
        prev_policy = best.policy
    return levels
