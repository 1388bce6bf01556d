"""Trial-simulation kernels.

The per-photon inner loop dominates the runtime of policy training, so it
exists twice: a compiled Cython kernel (built at install time) and a numpy
fallback vectorized over trials.  Both consume identical pre-generated
random draws in identical order and keep the same floating-point operation
order, so they produce the same trajectories (up to libm ULP differences on
exotic platforms); the active backend is picked at import time and can be
forced with the SWARMPHASE_KERNEL environment variable ("c" or "py").

Raw-draw contract per (trial k, photon p):
  uniforms[k, p, 0]       loss decision
  uniforms[k, p, 1]       measurement outcome
  theta_normals[k, p, :2] theta noise (non-ideal kinds only)
  axis_normals[k, p, :3]  axis perturbation (sigma_n > 0 only)
"""

import os

import numpy as np

from ..channel import NoiseKind, NoiseModel, skew_normal_coeffs
from . import _pykernel

_KIND_CODES = {NoiseKind.IDEAL: 0, NoiseKind.GAUSSIAN: 1, NoiseKind.SKEW_NORMAL: 2}

try:
    from . import _ckernel
    HAVE_C_KERNEL = True
except ImportError:
    _ckernel = None
    HAVE_C_KERNEL = False

_env = os.environ.get("SWARMPHASE_KERNEL", "").lower()
if _env == "py":
    DEFAULT_BACKEND = "py"
elif _env == "c":
    if not HAVE_C_KERNEL:
        raise ImportError("SWARMPHASE_KERNEL=c but the compiled kernel is missing")
    DEFAULT_BACKEND = "c"
else:
    DEFAULT_BACKEND = "c" if HAVE_C_KERNEL else "py"


def backend_module(backend=None):
    name = backend or DEFAULT_BACKEND
    if name == "c":
        if not HAVE_C_KERNEL:
            raise ValueError("compiled kernel not available")
        return _ckernel
    if name == "py":
        return _pykernel
    raise ValueError(f"unknown kernel backend {name!r}")


def draw_raws(model: NoiseModel, n_trials, n_qubits, generator):
    """Generate the raw random draws for a batch of trials.

    Generation order is fixed (uniforms, theta normals, axis normals) so a
    given generator state always yields the same trajectories.
    """
    uniforms = generator.random((n_trials, n_qubits, 2))
    if model.kind is NoiseKind.IDEAL:
        theta_normals = np.empty((n_trials, n_qubits, 0))
    else:
        theta_normals = generator.standard_normal((n_trials, n_qubits, 2))
    if model.sigma_n > 0.0:
        axis_normals = generator.standard_normal((n_trials, n_qubits, 3))
    else:
        axis_normals = np.empty((n_trials, n_qubits, 0))
    return uniforms, theta_normals, axis_normals


def simulate_batch(deltas, amplitudes, model: NoiseModel, phis, generator,
                   backend=None, photon_indexed=False, raws=None):
    """Simulate len(phis) independent trials of one policy.

    Returns (estimates, measured_counts, histories); histories pack the
    measured outcome bits in measurement order (LSB first).
    """
    deltas = np.array(deltas, dtype=np.float64)  # copy: sources may be read-only
    amplitudes = np.array(amplitudes, dtype=np.complex128)  # copy: sources may be read-only
    phis = np.ascontiguousarray(phis, dtype=np.float64)
    n_qubits = len(amplitudes) - 1
    if len(deltas) < n_qubits:
        raise ValueError("policy shorter than the input state")
    if raws is None:
        raws = draw_raws(model, len(phis), n_qubits, generator)
    uniforms, theta_normals, axis_normals = raws
    c_abs, c_lin, c_off = skew_normal_coeffs(model.sigma_theta, model.skewness_gamma)
    mod = backend_module(backend)
    return mod.run_batch(
        deltas, amplitudes, phis,
        np.ascontiguousarray(uniforms),
        np.ascontiguousarray(theta_normals),
        np.ascontiguousarray(axis_normals),
        _KIND_CODES[model.kind], model.sigma_theta, c_abs, c_lin, c_off,
        model.sigma_n, model.loss_eta, bool(photon_indexed),
    )
