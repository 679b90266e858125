"""Linear-optical processing of coherent-state words.

Every state in the scheme is coherent and every element is linear, so a
state is fully described by its vector of complex amplitudes (units of
sqrt(photons)) and the circuit acts on that vector as a matrix.

The triangular decomposition follows the memory interface: pulse ``l`` meets
memory modes ``0, 1, ..., l-1`` in turn and whatever is left of it is stored
in memory ``l``.  Each meeting is a two-mode real rotation whose power
reflectivity is the fraction of the pulse's power sent into the memory mode.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import IO, Iterable, Union

import numpy as np

from .hadamard import Codeword, _open

ORTHOGONALITY_TOL = 1e-10


def total_energy(v) -> float:
    v = np.asarray(v)
    return float(np.sum(np.abs(v) ** 2))


def encode_word(word: Codeword, n_bar: float) -> np.ndarray:
    """Coherent amplitudes sign_i * sqrt(n_bar) of a BPSK word."""
    if n_bar < 0:
        raise ValueError(f"mean photon number must be nonnegative, got {n_bar}")
    return word.signs * np.sqrt(n_bar) + 0j


@dataclass(frozen=True)
class BeamSplitterOp:
    """Two-mode interaction ``(x_a, x_b) <- sqrt(transmission) * matrix @ (x_a, x_b)``.

    ``mode_a == mode_b`` denotes a single-mode attenuator; its matrix is the identity.
    """

    mode_a: int
    mode_b: int
    power_reflectivity: float
    matrix: np.ndarray = field(repr=False)
    transmission: float = 1.0

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float).reshape(2, 2)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if not 0.0 < self.transmission <= 1.0:
            raise ValueError(f"transmission must be in (0, 1], got {self.transmission}")
        if not 0.0 <= self.power_reflectivity <= 1.0:
            raise ValueError(f"power reflectivity must be in [0, 1], got {self.power_reflectivity}")
        if self.is_attenuator:
            if not np.array_equal(m, np.eye(2)) or self.power_reflectivity != 0.0:
                raise ValueError("single-mode attenuator must carry the identity matrix")
            return
        if not np.allclose(m @ m.T, np.eye(2), atol=ORTHOGONALITY_TOL):
            raise ValueError("beam-splitter matrix must be orthogonal")
        R = self.power_reflectivity
        if not (np.isclose(m[0, 1] ** 2, R, atol=1e-9) and np.isclose(m[0, 0] ** 2, 1 - R, atol=1e-9)):
            raise ValueError("matrix entries do not match the power reflectivity")

    @property
    def is_attenuator(self) -> bool:
        return self.mode_a == self.mode_b

    @classmethod
    def attenuator(cls, mode: int, transmission: float) -> "BeamSplitterOp":
        return cls(mode, mode, 0.0, np.eye(2), transmission)


@dataclass(frozen=True)
class CircuitPlan:
    num_modes: int
    ops: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        for op in self.ops:
            if not (0 <= op.mode_a < self.num_modes and 0 <= op.mode_b < self.num_modes):
                raise ValueError(f"op {op} addresses a mode outside 0..{self.num_modes - 1}")

    def beam_splitters(self) -> list[BeamSplitterOp]:
        return [op for op in self.ops if not op.is_attenuator]

    def to_matrix(self) -> np.ndarray:
        """Compose all operations (losses included) into one L x L matrix."""
        return apply_plan(self, np.eye(self.num_modes))


def apply_plan(plan: CircuitPlan, v) -> np.ndarray:
    """Propagate amplitudes through ``plan``.

    ``v`` may be a single vector of length L or a stack whose first axis runs
    over the L modes (columns are propagated independently).
    """
    out = np.array(v, dtype=complex if np.iscomplexobj(v) else float, copy=True)
    if out.shape[0] != plan.num_modes:
        raise ValueError(f"plan has {plan.num_modes} modes, vector has {out.shape[0]}")
    for op in plan.ops:
        scale = np.sqrt(op.transmission)
        if op.is_attenuator:
            out[op.mode_a] *= scale
            continue
        xa, xb = out[op.mode_a].copy(), out[op.mode_b].copy()
        m = op.matrix
        out[op.mode_a] = scale * (m[0, 0] * xa + m[0, 1] * xb)
        out[op.mode_b] = scale * (m[1, 0] * xa + m[1, 1] * xb)
    return out


def apply_matrix(W, v) -> np.ndarray:
    W = np.asarray(W)
    v = np.asarray(v)
    if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[1] != v.shape[0]:
        raise ValueError(f"cannot apply a {W.shape} matrix to a length-{v.shape[0]} vector")
    return W @ v


def decompose_triangular(W) -> CircuitPlan:
    """Factor a real orthogonal matrix into the triangular memory-interface circuit.

    Working from the last pulse backwards, rotations in the (m, l) planes
    for m = l-1, ..., 0 clear column l above the diagonal.  Their transposes,
    replayed for m = 0, ..., l-1, form the interactions of pulse l.  A
    leftover sign on mode 0 is folded into the first interaction.
    """
    U = np.array(W, dtype=float)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise ValueError("decomposition needs a square matrix")
    L = U.shape[0]
    if np.max(np.abs(U.T @ U - np.eye(L))) >= ORTHOGONALITY_TOL:
        raise ValueError("matrix is not orthogonal within 1e-10")

    per_pulse: list[list[tuple[int, int, np.ndarray]]] = []
    for l in range(L - 1, 0, -1):
        ops = []
        for m in range(l - 1, -1, -1):
            r = np.hypot(U[m, l], U[l, l])
            if r == 0.0:
                c, s = 1.0, 0.0
            else:
                c, s = U[l, l] / r, U[m, l] / r
            rot = np.array([[c, -s], [s, c]])
            U[[m, l], :] = rot @ U[[m, l], :]
            ops.append((m, l, rot.T))
        ops.reverse()
        per_pulse.append(ops)
    per_pulse.reverse()

    sign0 = np.sign(U[0, 0])
    if sign0 < 0:
        if L == 1:
            raise ValueError("a lone sign flip on a single mode has no two-mode realization")
        m, l, G = per_pulse[0][0]
        per_pulse[0][0] = (m, l, G @ np.diag([-1.0, 1.0]))

    plan_ops = []
    for ops in per_pulse:
        for m, l, G in ops:
            if np.array_equal(G, np.eye(2)):
                continue
            R = min(max(G[0, 1] ** 2, 0.0), 1.0)
            plan_ops.append(BeamSplitterOp(m, l, R, G))
    return CircuitPlan(L, plan_ops)


def equalize_attenuation(plan: CircuitPlan, per_op_transmission: float) -> tuple[CircuitPlan, float]:
    """Give every beam splitter the loss ``per_op_transmission`` and equalize paths.

    Before each interaction the less attenuated of its two modes is dimmed to
    match the other, so the loss factors commute with the rotation; at the end
    every mode is dimmed to the lowest accumulated transmission.  The result
    is exactly ``sqrt(eta)`` times the lossless circuit.
    """
    t = per_op_transmission
    if not 0.0 < t <= 1.0:
        raise ValueError(f"per-op transmission must be in (0, 1], got {t}")
    if t == 1.0:
        return plan, 1.0
    gain = np.ones(plan.num_modes)
    ops = []
    for op in plan.beam_splitters():
        a, b = op.mode_a, op.mode_b
        low = min(gain[a], gain[b])
        for mode in (a, b):
            if gain[mode] > low:
                ops.append(BeamSplitterOp.attenuator(mode, low / gain[mode]))
        ops.append(BeamSplitterOp(a, b, op.power_reflectivity, op.matrix, t))
        gain[a] = gain[b] = low * t
    eta = float(gain.min())
    for mode in range(plan.num_modes):
        if gain[mode] > eta:
            ops.append(BeamSplitterOp.attenuator(mode, eta / gain[mode]))
    return CircuitPlan(plan.num_modes, ops), eta


# --- text format -----------------------------------------------------------

def format_plan(plan: CircuitPlan) -> str:
    """One op per line: ``mode_a mode_b R s00 s01 s10 s11 transmission``."""
    lines = []
    for op in plan.ops:
        m = op.matrix
        fields = [op.power_reflectivity, m[0, 0], m[0, 1], m[1, 0], m[1, 1], op.transmission]
        lines.append(f"{op.mode_a} {op.mode_b} " + " ".join(f"{x:.17g}" for x in fields))
    return "\n".join(lines) + ("\n" if lines else "")


def write_plan(plan: CircuitPlan, target: Union[str, os.PathLike, IO[str]]) -> None:
    with _open(target, "w") as f:
        f.write(format_plan(plan))


def parse_plan(lines: Iterable[str], num_modes: int) -> CircuitPlan:
    ops = []
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 8:
            raise ValueError(f"line {lineno}: expected 8 fields, got {len(parts)}")
        a, b = int(parts[0]), int(parts[1])
        R, s00, s01, s10, s11, t = map(float, parts[2:])
        ops.append(BeamSplitterOp(a, b, R, [[s00, s01], [s10, s11]], t))
    return CircuitPlan(num_modes, ops)
