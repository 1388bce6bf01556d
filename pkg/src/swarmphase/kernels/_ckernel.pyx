# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled trial-simulation kernel: per-trial loops over photons.

Consumes the same pre-generated raw draws as the numpy fallback in the
same order, so both backends follow the same trajectories (up to ULP-level
differences in the libm trig routines).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin, sqrt, fabs, fmod, floor

cnp.import_array()

cdef double PI = 3.141592653589793238462643383279502884
cdef double TWO_PI = 2.0 * PI


cdef inline double wrap(double x) nogil:
    cdef double y = fmod(x + PI, TWO_PI)
    if y < 0.0:
        y += TWO_PI
    return y - PI


def run_batch(double[::1] deltas,
              double complex[::1] amps,
              double[::1] phis,
              double[:, :, ::1] uniforms,
              double[:, :, ::1] theta_normals,
              double[:, :, ::1] axis_normals,
              int kind_code, double sigma_theta,
              double c_abs, double c_lin, double c_off,
              double sigma_n, double loss_eta, bint photon_indexed):
    cdef Py_ssize_t n_trials = phis.shape[0]
    cdef Py_ssize_t n_qubits = amps.shape[0] - 1
    cdef Py_ssize_t n_deltas = deltas.shape[0]

    estimates_arr = np.zeros(n_trials, dtype=np.float64)
    counts_arr = np.zeros(n_trials, dtype=np.int64)
    histories_arr = np.zeros(n_trials, dtype=np.int64)
    cdef double[::1] estimates = estimates_arr
    cdef long long[::1] counts = counts_arr
    cdef long long[::1] histories = histories_arr

    sq_arr = np.sqrt(np.arange(n_qubits + 1, dtype=np.float64))
    cdef double[::1] sq = sq_arr

    state_arr = np.empty(n_qubits + 1, dtype=np.complex128)
    w0_arr = np.empty(n_qubits + 1, dtype=np.complex128)
    w1_arr = np.empty(n_qubits + 1, dtype=np.complex128)
    cdef double complex[::1] state = state_arr
    cdef double complex[::1] w0 = w0_arr
    cdef double complex[::1] w1 = w1_arr

    cdef Py_ssize_t k, p, m, n, didx, count
    cdef double feedback, theta, theta_mean, ct, st_
    cdef double ax, ay, az, norm, p0, p1, prob, inv, sign, phi
    cdef double complex u00, u01, u10, u11, a0, a1, chosen_m
    cdef bint lost, has_axis
    cdef long long hist
    cdef int outcome

    has_axis = sigma_n > 0.0

    with nogil:
        for k in range(n_trials):
            for m in range(n_qubits + 1):
                state[m] = amps[m]
            feedback = 0.0
            count = 0
            didx = 0
            hist = 0
            phi = phis[k]

            for p in range(n_qubits):
                n = n_qubits - p
                lost = uniforms[k, p, 0] < loss_eta

                theta_mean = (phi - feedback) * 0.5
                if kind_code == 0:
                    theta = theta_mean
                elif kind_code == 1:
                    theta = theta_mean + sigma_theta * theta_normals[k, p, 1]
                else:
                    theta = (theta_mean + c_abs * fabs(theta_normals[k, p, 0])
                             + c_lin * theta_normals[k, p, 1] + c_off)

                if lost:
                    u00 = 1.0
                    u01 = 0.0
                    u10 = 0.0
                    u11 = 1.0
                else:
                    if has_axis:
                        ax = sigma_n * axis_normals[k, p, 0]
                        ay = 1.0 + sigma_n * axis_normals[k, p, 1]
                        az = sigma_n * axis_normals[k, p, 2]
                        norm = sqrt(ax * ax + ay * ay + az * az)
                        ax = ax / norm
                        ay = ay / norm
                        az = az / norm
                    else:
                        ax = 0.0
                        ay = 1.0
                        az = 0.0
                    ct = cos(theta)
                    st_ = sin(theta)
                    u00 = ct - 1j * (st_ * az)
                    u01 = -1j * (st_ * ax) - st_ * ay
                    u10 = -1j * (st_ * ax) + st_ * ay
                    u11 = ct + 1j * (st_ * az)

                p0 = 0.0
                p1 = 0.0
                for m in range(n):
                    # branch vectors: v0[m] = state[m]*sqrt((n-m)/n),
                    #                 v1[m] = state[m+1]*sqrt((m+1)/n)
                    a0 = state[m] * (sq[n - m] / sq[n])
                    a1 = state[m + 1] * (sq[m + 1] / sq[n])
                    w0[m] = u00 * a0 + u01 * a1
                    w1[m] = u10 * a0 + u11 * a1
                    p0 += w0[m].real * w0[m].real + w0[m].imag * w0[m].imag
                    p1 += w1[m].real * w1[m].real + w1[m].imag * w1[m].imag

                outcome = 0 if uniforms[k, p, 1] < p0 else 1
                prob = p0 if outcome == 0 else p1
                inv = 1.0 / sqrt(prob)
                if outcome == 0:
                    for m in range(n):
                        state[m] = w0[m] * inv
                else:
                    for m in range(n):
                        state[m] = w1[m] * inv

                if not lost:
                    sign = 1.0 if outcome == 1 else -1.0
                    feedback = wrap(feedback + sign * deltas[didx])
                    hist = hist | ((<long long> outcome) << count)
                    count += 1
                    if not photon_indexed:
                        didx += 1
                if photon_indexed:
                    didx += 1

            estimates[k] = feedback if count > 0 else 0.0
            counts[k] = count
            histories[k] = hist

    return estimates_arr, counts_arr, histories_arr
