"""Per-photon interferometer channel: noise sampling, loss, qubit rotation.

Each photon is transformed by U_n(theta) = exp(-i theta sigma.n) with
(theta, n) drawn from a distribution with <theta> = (phi - feedback)/2 and
<n> = (0, 1, 0), or lost outright with probability loss_eta.
"""

import enum
import hashlib
from dataclasses import dataclass

import numpy as np

AXIS_TOL = 1e-12
# Feasibility bound on the skewness of the skew-normal family.
MAX_SKEWNESS = 0.9952717


class NoiseKind(enum.Enum):
    IDEAL = "ideal"
    GAUSSIAN = "gaussian"
    SKEW_NORMAL = "skew_normal"


@dataclass(frozen=True)
class NoiseModel:
    kind: NoiseKind = NoiseKind.IDEAL
    sigma_theta: float = 0.0
    sigma_n: float = 0.0
    skewness_gamma: float = 0.0
    loss_eta: float = 0.0

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", NoiseKind(self.kind))
        if not 0.0 <= self.loss_eta <= 1.0:
            raise ValueError("loss_eta must be in [0, 1]")
        if self.sigma_theta < 0 or self.sigma_n < 0:
            raise ValueError("sigma fields must be >= 0")
        if abs(self.skewness_gamma) >= MAX_SKEWNESS:
            raise ValueError(
                f"|skewness| must be < {MAX_SKEWNESS} (skew-normal feasibility)"
            )

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "sigma_theta": self.sigma_theta,
            "sigma_n": self.sigma_n,
            "skewness_gamma": self.skewness_gamma,
            "loss_eta": self.loss_eta,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            kind=NoiseKind(d["kind"]),
            sigma_theta=d["sigma_theta"],
            sigma_n=d["sigma_n"],
            skewness_gamma=d["skewness_gamma"],
            loss_eta=d["loss_eta"],
        )


@dataclass(frozen=True)
class ChannelDraw:
    lost: bool
    theta: float
    axis: tuple


def _id_to_int(part):
    if isinstance(part, int):
        return part
    digest = hashlib.sha256(str(part).encode()).digest()
    return int.from_bytes(digest[:4], "little")


class RngStream:
    """Deterministic pseudo-random stream keyed by (master_seed, *ids).

    Identical key -> identical draw sequence, independent of platform and
    worker scheduling.  Child streams are derived by appending ids.
    """

    def __init__(self, master_seed, *ids):
        self.key = (int(master_seed),) + tuple(_id_to_int(i) for i in ids)
        self._gen = None

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            self._gen = np.random.default_rng(np.random.SeedSequence(self.key))
        return self._gen

    def derive(self, *ids) -> "RngStream":
        return RngStream(*(self.key + tuple(_id_to_int(i) for i in ids)))


def skew_normal_coeffs(sigma_theta, gamma):
    """Coefficients (c_abs, c_lin, c_off) so that for standard normals a, b

        theta = mean + c_abs*|a| + c_lin*b + c_off

    is skew-normal with the requested std and skewness and mean `mean`.
    Solved from the standard moment relations of the skew-normal family.
    """
    if gamma == 0.0:
        return 0.0, sigma_theta, 0.0
    b = np.sqrt(2.0 / np.pi)
    g = abs(gamma) ** (2.0 / 3.0)
    delta = np.sqrt((np.pi / 2.0) * g / (g + ((4.0 - np.pi) / 2.0) ** (2.0 / 3.0)))
    delta = np.copysign(delta, gamma)
    omega = sigma_theta / np.sqrt(1.0 - b * b * delta * delta)
    return omega * delta, omega * np.sqrt(1.0 - delta * delta), -omega * delta * b


def theta_from_normals(model: NoiseModel, mean, n0, n1):
    """Map two standard normals to a theta draw around `mean` (vectorized)."""
    if model.kind is NoiseKind.IDEAL:
        return mean + np.zeros_like(np.asarray(n0, dtype=float))
    if model.kind is NoiseKind.GAUSSIAN:
        return mean + model.sigma_theta * np.asarray(n1)
    c_abs, c_lin, c_off = skew_normal_coeffs(model.sigma_theta, model.skewness_gamma)
    return mean + c_abs * np.abs(n0) + c_lin * np.asarray(n1) + c_off


def axis_from_normals(sigma_n, a, b, c):
    """Perturb (0,1,0) per-component and renormalize (vectorized over draws)."""
    x = sigma_n * np.asarray(a, dtype=float)
    y = 1.0 + sigma_n * np.asarray(b, dtype=float)
    z = sigma_n * np.asarray(c, dtype=float)
    norm = np.sqrt(x * x + y * y + z * z)
    return x / norm, y / norm, z / norm


def sample_channel(model: NoiseModel, phi, feedback, rng: RngStream) -> ChannelDraw:
    """One channel draw: loss decision, then (theta, axis).

    Draw-consumption order matches the batch kernels: loss uniform, then two
    theta normals (non-ideal kinds), then three axis normals (sigma_n > 0).
    """
    gen = rng.generator
    if gen.uniform() < model.loss_eta:
        return ChannelDraw(lost=True, theta=0.0, axis=(0.0, 1.0, 0.0))
    mean = (phi - feedback) / 2.0
    if model.kind is NoiseKind.IDEAL:
        theta = mean
    else:
        n0, n1 = gen.standard_normal(2)
        theta = float(theta_from_normals(model, mean, n0, n1))
    if model.sigma_n > 0.0:
        a, b, c = gen.standard_normal(3)
        x, y, z = axis_from_normals(model.sigma_n, a, b, c)
        axis = (float(x), float(y), float(z))
    else:
        axis = (0.0, 1.0, 0.0)
    return ChannelDraw(lost=False, theta=theta, axis=axis)


def rotation_matrix(theta, axis):
    """U_n(theta) = cos(theta) I - i sin(theta) (nx sx + ny sy + nz sz)."""
    nx, ny, nz = axis
    if abs(nx * nx + ny * ny + nz * nz - 1.0) > 1e-9:
        raise ValueError("rotation axis must be a unit vector")
    c = np.cos(theta)
    s = np.sin(theta)
    return np.array(
        [
            [c - 1j * s * nz, -1j * s * nx - s * ny],
            [-1j * s * nx + s * ny, c + 1j * s * nz],
        ],
        dtype=np.complex128,
    )


def visibility(sigma_theta):
    """Fringe visibility attributed to Gaussian theta noise: 1/(2 e^{2s^2} - 1)."""
    if sigma_theta < 0:
        raise ValueError("sigma_theta must be >= 0")
    return 1.0 / (2.0 * np.exp(2.0 * sigma_theta**2) - 1.0)
