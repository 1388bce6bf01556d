"""Generalized logarithmic search (GLS) feedback controller.

A policy is the vector (D_1, ..., D_N) of feedback increments.  Starting
from feedback 0, the m-th successful measurement u updates the feedback to
wrap(Phi - (-1)^u * D_m), and the final estimate is the final feedback.
Lost photons leave the feedback untouched.
"""

from dataclasses import dataclass, replace

import numpy as np


def wrap_angle(x):
    """Wrap angle(s) into [-pi, pi)."""
    return np.mod(np.asarray(x) + np.pi, 2.0 * np.pi) - np.pi


class PolicyExhaustedError(RuntimeError):
    """More measurements than the policy has feedback increments."""


@dataclass(frozen=True)
class GlsPolicy:
    deltas: np.ndarray  # radians, wrapped to [-pi, pi)

    def __post_init__(self):
        d = wrap_angle(np.asarray(self.deltas, dtype=float)).reshape(-1)
        d.setflags(write=False)
        object.__setattr__(self, "deltas", d)

    def __len__(self):
        return len(self.deltas)


@dataclass(frozen=True)
class ControllerState:
    feedback_phi: float = 0.0
    measured_count: int = 0
    last_outcome: int | None = None
    # Delta entries skipped by lost photons; nonzero only in the
    # photon-indexed variant (see on_loss).
    skipped: int = 0

    @property
    def next_delta_index(self):
        return self.measured_count + self.skipped


@dataclass(frozen=True)
class PhaseEstimate:
    estimate: float
    informative: bool = True
    error: float | None = None


def initial_state() -> ControllerState:
    return ControllerState(feedback_phi=0.0, measured_count=0)


def on_measurement(policy: GlsPolicy, state: ControllerState, outcome: int) -> ControllerState:
    if state.next_delta_index >= len(policy):
        raise PolicyExhaustedError(
            f"policy of length {len(policy)} exhausted after "
            f"{state.measured_count} measurements"
        )
    if outcome not in (0, 1):
        raise ValueError("outcome must be 0 or 1")
    delta = policy.deltas[state.next_delta_index]
    sign = -1.0 if outcome == 0 else 1.0  # -(-1)^u
    return ControllerState(
        feedback_phi=float(wrap_angle(state.feedback_phi + sign * delta)),
        measured_count=state.measured_count + 1,
        last_outcome=outcome,
        skipped=state.skipped,
    )


def on_loss(state: ControllerState, photon_indexed: bool = False) -> ControllerState:
    """Lost photon: feedback unchanged.  By default the loss does not consume
    a Delta entry (measurement-indexed); photon_indexed=True burns the entry
    instead, for comparison runs."""
    if photon_indexed:
        return replace(state, skipped=state.skipped + 1)
    return state


def final_estimate(policy: GlsPolicy, state: ControllerState) -> PhaseEstimate:
    """Final phase estimate: the current feedback, which already incorporates
    the last update.  With zero measurements the estimate defaults to 0 and
    is flagged uninformative."""
    if state.measured_count == 0:
        return PhaseEstimate(estimate=0.0, informative=False)
    return PhaseEstimate(estimate=float(wrap_angle(state.feedback_phi)))


def ls_policy(n_qubits: int) -> GlsPolicy:
    """Plain logarithmic search: (pi/2, pi/4, ..., pi/2^N)."""
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    return GlsPolicy(np.pi / 2.0 ** np.arange(1, n_qubits + 1))


MAX_TREE_DEPTH = 16


def export_decision_tree(policy: GlsPolicy, n_qubits: int) -> str:
    """DOT digraph of the lossless decision tree: inner nodes carry the
    feedback phase per history, leaves the final estimate.  Left child is
    outcome 0, right child outcome 1."""
    if n_qubits != len(policy):
        raise ValueError("n_qubits must equal the policy length")
    if n_qubits > MAX_TREE_DEPTH:
        raise ValueError(
            f"refusing to expand a depth-{n_qubits} tree (2^(N+1)-1 nodes)"
        )
    lines = ["digraph gls_policy {", "  node [shape=circle];"]
    # Node per history prefix; histories encoded as bit strings.
    stack = [("", initial_state())]
    while stack:
        hist, state = stack.pop()
        name = "h" + (hist or "root")
        if len(hist) == n_qubits:
            lines.append(
                f'  {name} [shape=box, label="est={state.feedback_phi:.6f}"];'
            )
            continue
        lines.append(f'  {name} [label="Phi={state.feedback_phi:.6f}"];')
        for outcome in (0, 1):
            child = on_measurement(policy, state, outcome)
            child_hist = hist + str(outcome)
            child_name = "h" + child_hist
            lines.append(f'  {name} -> {child_name} [label="u={outcome}"];')
            stack.append((child_hist, child))
    lines.append("}")
    return "\n".join(lines)
