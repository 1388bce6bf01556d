"""Numpy fallback kernel, vectorized over trials.

Keeps the same per-trial floating-point operation order as the compiled
kernel (inner accumulations run in index order), so both backends produce
identical results for identical raw draws.
"""

import numpy as np

TWO_PI = 2.0 * np.pi


def _wrap(x):
    return np.mod(x + np.pi, TWO_PI) - np.pi


def run_batch(deltas, amps, phis, uniforms, theta_normals, axis_normals,
              kind_code, sigma_theta, c_abs, c_lin, c_off,
              sigma_n, loss_eta, photon_indexed):
    n_trials = len(phis)
    n_qubits = len(amps) - 1

    state = np.tile(amps, (n_trials, 1))
    feedback = np.zeros(n_trials)
    counts = np.zeros(n_trials, dtype=np.int64)
    delta_idx = np.zeros(n_trials, dtype=np.int64)
    histories = np.zeros(n_trials, dtype=np.int64)
    sq = np.sqrt(np.arange(n_qubits + 1, dtype=np.float64))

    for p in range(n_qubits):
        n = n_qubits - p  # qubits remaining before this extraction
        f0 = sq[n:0:-1] / sq[n]   # sqrt((n-m)/n), m = 0..n-1
        f1 = sq[1:n + 1] / sq[n]  # sqrt((m+1)/n)
        v0 = state[:, :n] * f0
        v1 = state[:, 1:n + 1] * f1

        lost = uniforms[:, p, 0] < loss_eta

        theta_mean = (phis - feedback) * 0.5
        if kind_code == 0:
            theta = theta_mean
        elif kind_code == 1:
            theta = theta_mean + sigma_theta * theta_normals[:, p, 1]
        else:
            theta = (theta_mean + c_abs * np.abs(theta_normals[:, p, 0])
                     + c_lin * theta_normals[:, p, 1] + c_off)

        if sigma_n > 0.0:
            ax = sigma_n * axis_normals[:, p, 0]
            ay = 1.0 + sigma_n * axis_normals[:, p, 1]
            az = sigma_n * axis_normals[:, p, 2]
            norm = np.sqrt(ax * ax + ay * ay + az * az)
            ax, ay, az = ax / norm, ay / norm, az / norm
        else:
            ax = np.zeros(n_trials)
            ay = np.ones(n_trials)
            az = np.zeros(n_trials)

        ct = np.cos(theta)
        st = np.sin(theta)
        u00 = ct - 1j * (st * az)
        u01 = -1j * (st * ax) - st * ay
        u10 = -1j * (st * ax) + st * ay
        u11 = ct + 1j * (st * az)
        # Lost photons are collapsed by a hidden computational-basis
        # measurement: identity in place of the rotation.
        u00 = np.where(lost, 1.0 + 0.0j, u00)
        u01 = np.where(lost, 0.0 + 0.0j, u01)
        u10 = np.where(lost, 0.0 + 0.0j, u10)
        u11 = np.where(lost, 1.0 + 0.0j, u11)

        w0 = u00[:, None] * v0 + u01[:, None] * v1
        w1 = u10[:, None] * v0 + u11[:, None] * v1

        p0 = np.zeros(n_trials)
        p1 = np.zeros(n_trials)
        for m in range(n):
            p0 += w0[:, m].real * w0[:, m].real + w0[:, m].imag * w0[:, m].imag
            p1 += w1[:, m].real * w1[:, m].real + w1[:, m].imag * w1[:, m].imag

        outcome = (uniforms[:, p, 1] >= p0).astype(np.int64)
        chosen = np.where(outcome[:, None] == 0, w0, w1)
        prob = np.where(outcome == 0, p0, p1)
        state = chosen / np.sqrt(prob)[:, None]

        measured = ~lost
        sign = np.where(outcome == 1, 1.0, -1.0)  # -(-1)^u
        step = np.take(deltas, np.minimum(delta_idx, len(deltas) - 1))
        feedback = np.where(
            measured, _wrap(feedback + sign * step), feedback
        )
        histories = np.where(
            measured, histories | (outcome << counts), histories
        )
        counts = counts + measured.astype(np.int64)
        if photon_indexed:
            delta_idx += 1
        else:
            delta_idx += measured.astype(np.int64)

    estimates = np.where(counts > 0, feedback, 0.0)
    return estimates, counts, histories
