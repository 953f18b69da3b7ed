"""Polarization optics as mode unitaries.

Conventions (fixed, so golden amplitudes are reproducible):

* ``hwp(theta)  = [[cos 2t, sin 2t], [sin 2t, -cos 2t]]``
* ``qwp(theta)  = [[cos^2 t + i sin^2 t, (1-i) sin t cos t],
  [(1-i) sin t cos t, sin^2 t + i cos^2 t]]``
* PBS transmits H and reflects V with a +1 reflection phase, so it is a pure
  permutation: ``a_H -> c_H, b_H -> d_H, a_V -> d_V, b_V -> c_V``.
* ``pbs45`` is a PBS sandwiched between 22.5 degree half-wave plates on all
  four ports, i.e. a PBS in the +/- basis.

Polarization matrices act on the (H, V) amplitudes of one line and are
applied identically to every temporal bin.  Only :func:`mismatch` couples
temporal bins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fock import (EPS_AMP, Ket, ModeLabel, QubitState, apply_mode_unitary,
                   check_unitary, project)

ELEMENT_KINDS = ("hwp", "qwp", "pbs", "pbs45", "polarizer", "mismatch", "pauli")
TWO_LINE = ("pbs", "pbs45")


def hwp(theta_deg: float) -> np.ndarray:
    t = 2 * math.radians(theta_deg)
    return np.array([[math.cos(t), math.sin(t)], [math.sin(t), -math.cos(t)]], dtype=complex)


def qwp(theta_deg: float) -> np.ndarray:
    t = math.radians(theta_deg)
    c, s = math.cos(t), math.sin(t)
    return np.array([[c * c + 1j * s * s, (1 - 1j) * s * c],
                     [(1 - 1j) * s * c, s * s + 1j * c * c]], dtype=complex)


def pauli(kind: str) -> np.ndarray:
    kind = kind.upper()
    if kind == "X":
        return np.array([[0, 1], [1, 0]], dtype=complex)
    if kind == "Y":
        return np.array([[0, -1j], [1j, 0]], dtype=complex)
    if kind == "Z":
        return np.array([[1, 0], [0, -1]], dtype=complex)
    if kind == "I":
        return np.eye(2, dtype=complex)
    raise ValueError(f"unknown Pauli {kind!r}")


def pbs_matrix() -> np.ndarray:
    """4x4 permutation on (a_H, a_V, b_H, b_V) -> (c_H, c_V, d_H, d_V)."""
    M = np.zeros((4, 4), dtype=complex)
    M[0, 0] = 1  # a_H -> c_H
    M[3, 1] = 1  # a_V -> d_V
    M[2, 2] = 1  # b_H -> d_H
    M[1, 3] = 1  # b_V -> c_V
    return M


def pbs45_matrix() -> np.ndarray:
    h = hwp(22.5)
    both = np.kron(np.eye(2), h)
    return both @ pbs_matrix() @ both


def mismatch_matrix(overlap: float) -> np.ndarray:
    """Bin-mixing rotation sending bin 0 to ``overlap*bin0 + sqrt(1-overlap^2)*bin1``."""
    if not 0.0 <= overlap <= 1.0:
        raise ValueError(f"overlap must lie in [0, 1], got {overlap}")
    s = math.sqrt(max(0.0, 1.0 - overlap * overlap))
    return np.array([[overlap, -s], [s, overlap]], dtype=complex)


def rotation_to_h(state: QubitState) -> np.ndarray:
    """Unitary W with W|state> = |H> and W|state_perp> = |V>."""
    a, b = state.alpha, state.beta
    return np.array([[a.conjugate(), b.conjugate()], [-b, a]], dtype=complex)


# -- application to kets -----------------------------------------------------

def _line_bin_modes(line: str, bins: int) -> list[ModeLabel]:
    return [ModeLabel(line, p, b) for p in ("H", "V") for b in range(bins)]


def apply_polarization(ket: Ket, line: str, M: np.ndarray, check: bool = True,
                       prune: float = EPS_AMP) -> Ket:
    """Apply a 2x2 polarization matrix to every temporal bin of ``line``."""
    bins = ket.bins
    U = np.kron(np.asarray(M, dtype=complex), np.eye(bins))
    return apply_mode_unitary(ket, U, _line_bin_modes(line, bins), prune=prune, check=check)


def apply_two_line(ket: Ket, a: str, b: str, M: np.ndarray, prune: float = EPS_AMP) -> Ket:
    if a == b:
        raise ValueError("two-line element needs two distinct lines")
    bins = ket.bins
    U = np.kron(np.asarray(M, dtype=complex), np.eye(bins))
    modes = _line_bin_modes(a, bins) + _line_bin_modes(b, bins)
    return apply_mode_unitary(ket, U, modes, prune=prune)


def swap_lines(ket: Ket, a: str, b: str) -> Ket:
    """Exchange the contents of two lines (a mode permutation)."""
    if a == b:
        return ket
    ia, ib = ket.line_indices(a), ket.line_indices(b)
    if len(ia) != len(ib):
        raise ValueError("lines have different mode counts")
    perm = list(range(len(ket.modes)))
    for x, y in zip(ia, ib):
        perm[x], perm[y] = y, x
    terms = {tuple(occ[perm[i]] for i in range(len(occ))): amp for occ, amp in ket}
    return Ket(ket.modes, terms, ket.norm_tracked)


def apply_mismatch(ket: Ket, line: str, overlap: float, prune: float = EPS_AMP) -> Ket:
    if ket.bins < 2:
        raise ValueError("mismatch needs at least two temporal bins")
    M = mismatch_matrix(overlap)
    modes = [ModeLabel(line, p, b) for p in ("H", "V") for b in (0, 1)]
    U = np.kron(np.eye(2), M)
    return apply_mode_unitary(ket, U, modes, prune=prune)


def polarizer(ket: Ket, line: str, theta_deg: float | QubitState):
    """Post-selecting polarizer: every photon in ``line`` must pass.

    Returns ``(ket, pass_probability)``; ``(None, 0.0)`` if nothing passes.
    """
    state = theta_deg if isinstance(theta_deg, QubitState) else QubitState.linear(theta_deg)
    W = rotation_to_h(state)
    rotated = apply_polarization(ket, line, W)
    v_idx = [i for i, m in enumerate(rotated.modes) if m.spatial == line and m.polarization == "V"]
    out, p = project(rotated, lambda occ: all(occ[i] == 0 for i in v_idx))
    if out is None:
        return None, 0.0
    return apply_polarization(out, line, W.conj().T), p


@dataclass(frozen=True)
class ElementSpec:
    """One optical element bound to its lines.

    ``outputs`` renames the output lines of a two-line element; when empty the
    element acts in place.
    """

    kind: str
    lines: tuple[str, ...]
    outputs: tuple[str, ...] = ()
    angle_deg: float | None = None
    overlap: float | None = None
    pauli: str | None = None

    def __post_init__(self):
        if self.kind not in ELEMENT_KINDS:
            raise ValueError(f"unknown element kind {self.kind!r}")
        want = 2 if self.kind in TWO_LINE else 1
        if len(self.lines) != want:
            raise ValueError(f"{self.kind} binds {want} line(s), got {len(self.lines)}")
        if self.outputs and len(self.outputs) != want:
            raise ValueError(f"{self.kind} needs {want} output line(s)")
        if len(set(self.lines)) != len(self.lines):
            raise ValueError("element lines must be distinct")
        if self.kind == "mismatch" and not 0.0 <= (self.overlap if self.overlap is not None else -1) <= 1.0:
            raise ValueError("mismatch overlap must lie in [0, 1]")
        if self.kind in ("hwp", "qwp", "polarizer") and self.angle_deg is None:
            raise ValueError(f"{self.kind} needs an angle")
        if self.kind == "pauli" and (self.pauli or "").upper() not in ("X", "Y", "Z"):
            raise ValueError("pauli kind must be X, Y or Z")
        if self.kind != "polarizer":
            check_unitary(self.matrix())

    @property
    def output_lines(self) -> tuple[str, ...]:
        return self.outputs or self.lines

    def matrix(self) -> np.ndarray:
        """Polarization matrix (2x2, or 4x4 for two-line elements; bins for mismatch)."""
        if self.kind == "hwp":
            return hwp(self.angle_deg)
        if self.kind == "qwp":
            return qwp(self.angle_deg)
        if self.kind == "pauli":
            return pauli(self.pauli)
        if self.kind == "pbs":
            return pbs_matrix()
        if self.kind == "pbs45":
            return pbs45_matrix()
        if self.kind == "mismatch":
            return mismatch_matrix(self.overlap)
        raise ValueError("polarizer is not unitary")

    def apply(self, ket: Ket, prune: float = EPS_AMP):
        """Returns ``(ket, probability)``; probability is 1 for unitary elements."""
        if self.kind == "polarizer":
            return polarizer(ket, self.lines[0], self.angle_deg)
        if self.kind == "mismatch":
            return apply_mismatch(ket, self.lines[0], self.overlap, prune=prune), 1.0
        if self.kind in TWO_LINE:
            a, b = self.lines
            out = apply_two_line(ket, a, b, self.matrix(), prune=prune)
            for src, dst in zip(self.lines, self.output_lines):
                out = swap_lines(out, src, dst)
            return out, 1.0
        return apply_polarization(ket, self.lines[0], self.matrix(), prune=prune), 1.0
