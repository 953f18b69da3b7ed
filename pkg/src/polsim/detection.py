"""Threshold detection, heralding and coincidence scans.

Detectors do not resolve temporal bins or photon number.  A detector sitting
behind an analyzer set to polarization ``s`` fires when at least one photon in
its line is found in ``s``; after rotating ``s`` onto ``H`` this is diagonal in
the Fock basis, so firing probabilities are sums of squared amplitudes.
Bins stay in the ket as a purification: terms that differ only in the bin of
a detected photon are orthogonal and never interfere again, which is the same
as summing the bin outcomes incoherently.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .fock import OUTCOME_STATES, Ket, QubitState, project
from .optics import apply_polarization, rotation_to_h

ANALYSES = {"HV": ("H", "V"), "PM": ("P", "M"), "CIRC": ("L", "R"), "POL": ("T",)}


class DetectionError(ValueError):
    pass


class ZeroProbabilityError(RuntimeError):
    """The requested herald or coincidence pattern never occurs."""


def outcome_state(letter: str) -> QubitState:
    try:
        return OUTCOME_STATES[letter]
    except KeyError:
        raise DetectionError(f"unknown outcome {letter!r}") from None


@dataclass(frozen=True)
class DetectorSpec:
    """A threshold detector behind a polarization analyzer on one line.

    ``analysis`` is one of HV, PM, CIRC (two settings each, reported as
    separate outcomes) or POL (a single polarizer at ``theta``).
    """

    line: str
    analysis: str = "HV"
    theta: float | None = None
    efficiency: float = 1.0

    def __post_init__(self):
        if self.analysis not in ANALYSES:
            raise DetectionError(f"unknown analysis {self.analysis!r}")
        if self.analysis == "POL" and self.theta is None:
            raise DetectionError("polarizer analysis needs an angle")
        if not 0.0 < self.efficiency <= 1.0:
            raise DetectionError("efficiency must lie in (0, 1]")

    def settings(self, theta: float | None = None) -> list[tuple[str, QubitState]]:
        if self.analysis == "POL":
            angle = self.theta if theta is None else theta
            return [("T", QubitState.linear(angle))]
        return [(x, outcome_state(x)) for x in ANALYSES[self.analysis]]


@dataclass(frozen=True)
class HeraldRule:
    """Required (line, outcome letter) pairs; each line holds exactly one photon."""

    outcomes: tuple[tuple[str, str], ...]

    def __post_init__(self):
        lines = [l for l, _ in self.outcomes]
        if len(set(lines)) != len(lines):
            raise DetectionError("heralded lines must be distinct")
        for _, x in self.outcomes:
            outcome_state(x)

    @property
    def lines(self) -> tuple[str, ...]:
        return tuple(l for l, _ in self.outcomes)


@dataclass
class CoincidenceResult:
    angle_deg: float | None
    probabilities: dict[str, float]
    herald_probability: float = 1.0
    states: dict[str, Ket] = field(default_factory=dict, repr=False)

    @property
    def total(self) -> float:
        return sum(self.probabilities.values())


def _indices(ket: Ket, line: str, pol: str | None = None) -> list[int]:
    return [i for i, m in enumerate(ket.modes)
            if m.spatial == line and (pol is None or m.polarization == pol)]


def rotate_to_h(ket: Ket, line: str, state: QubitState) -> Ket:
    if state == OUTCOME_STATES["H"]:
        return ket
    return apply_polarization(ket, line, rotation_to_h(state))


def rotate_back(ket: Ket, line: str, state: QubitState) -> Ket:
    if state == OUTCOME_STATES["H"]:
        return ket
    return apply_polarization(ket, line, rotation_to_h(state).conj().T)


def project_single_photon(ket: Ket, line: str, state: QubitState):
    """Project onto exactly one photon in ``line`` (any bin) found in ``state``."""
    rot = rotate_to_h(ket, line, state)
    h_idx, v_idx = _indices(rot, line, "H"), _indices(rot, line, "V")
    out, p = project(rot, lambda occ: sum(occ[i] for i in h_idx) == 1
                     and all(occ[i] == 0 for i in v_idx))
    if out is None:
        return None, 0.0
    return rotate_back(out, line, state), p


def herald(ket: Ket, rule: HeraldRule):
    """Condition on every heralded line holding one photon in the required outcome.

    Returns ``(ket, probability)``, or ``(None, 0.0)`` for an impossible herald.
    """
    total = 1.0
    for line, letter in rule.outcomes:
        ket, p = project_single_photon(ket, line, outcome_state(letter))
        if ket is None:
            return None, 0.0
        total *= p
    return ket, total


def fires(ket: Ket, line: str, state: QubitState):
    """Condition on a threshold detector behind an analyzer set to ``state`` firing."""
    rot = rotate_to_h(ket, line, state)
    h_idx = _indices(rot, line, "H")
    out, p = project(rot, lambda occ: any(occ[i] for i in h_idx))
    if out is None:
        return None, 0.0
    return rotate_back(out, line, state), p


def fire_probability(ket: Ket, settings: Sequence[tuple[str, QubitState]],
                     efficiency: float | Sequence[float] = 1.0) -> float:
    """Probability that every listed detector fires, relative to the ket's norm.

    With efficiency ``eta`` a detector seeing ``n`` photons in its pass mode
    fires with probability ``1 - (1 - eta)^n``.
    """
    if isinstance(efficiency, (int, float)):
        efficiency = [float(efficiency)] * len(settings)
    rot = ket
    for line, state in settings:
        rot = rotate_to_h(rot, line, state)
    idx = [_indices(rot, line, "H") for line, _ in settings]
    n2 = rot.norm_squared()
    if n2 == 0:
        return 0.0
    total = 0.0
    for occ, amp in rot:
        w = abs(amp) ** 2
        for ids, eta in zip(idx, efficiency):
            n = sum(occ[i] for i in ids)
            if n == 0:
                w = 0.0
                break
            if eta < 1.0:
                w *= 1.0 - (1.0 - eta) ** n
        total += w
    return total / n2


def coincidence_scan(ket: Ket, detectors: Sequence[DetectorSpec],
                     scan: tuple[str, Iterable[float]] | None = None,
                     ignore_lines: Iterable[str] = (), keep_states: bool = False,
                     herald_probability: float = 1.0) -> list[CoincidenceResult]:
    """Full-coincidence probabilities for every outcome pattern.

    ``scan`` is ``(line, angles)``; that line's detector must be a polarizer
    and its angle is swept.  Patterns concatenate outcome letters in detector
    order.  Every occupied line must carry a detector unless listed in
    ``ignore_lines`` (heralded lines, typically).
    """
    detectors = list(detectors)
    lines = [d.line for d in detectors]
    if len(set(lines)) != len(lines):
        raise DetectionError("one detector per line")
    uncovered = ket.occupied_lines() - set(lines) - set(ignore_lines)
    if uncovered:
        raise DetectionError(f"occupied line(s) without detector: {sorted(uncovered)}")
    scan_line, angles = (None, [None]) if scan is None else (scan[0], list(scan[1]))
    if scan_line is not None:
        match = [d for d in detectors if d.line == scan_line]
        if not match or match[0].analysis != "POL":
            raise DetectionError(f"scanned line {scan_line!r} needs a polarizer detector")
    fixed = [d for d in detectors if d.line != scan_line]
    use_eff = any(d.efficiency < 1.0 for d in detectors)

    results = []
    for angle in angles:
        probs, states = {}, {}
        for combo in itertools.product(*[d.settings() for d in fixed]):
            settings = {d.line: s for d, (_, s) in zip(fixed, combo)}
            letters = {d.line: x for d, (x, _) in zip(fixed, combo)}
            if scan_line is not None:
                d = next(d for d in detectors if d.line == scan_line)
                (x, s), = d.settings(angle)
                settings[scan_line], letters[scan_line] = s, x
            pattern = "".join(letters[l] for l in lines)
            ordered = [(l, settings[l]) for l in lines]
            if use_eff:
                effs = [d.efficiency for d in detectors]
                probs[pattern] = fire_probability(ket, ordered, effs)
            else:
                cond, p = ket, 1.0
                for l, s in ordered:
                    cond, q = fires(cond, l, s)
                    if cond is None:
                        p = 0.0
                        break
                    p *= q
                probs[pattern] = p
                if keep_states and cond is not None:
                    states[pattern] = cond
        results.append(CoincidenceResult(angle, probs, herald_probability, states))
    return results


def visibility(curve: Sequence[float]) -> float:
    curve = np.asarray(curve, dtype=float)
    if curve.size == 0:
        raise ValueError("empty curve")
    hi, lo = float(curve.max()), float(curve.min())
    if hi + lo <= 0:
        raise ValueError("visibility undefined for an all-zero curve")
    return (hi - lo) / (hi + lo)


def fringe_phase(angles_deg: Sequence[float], curve: Sequence[float]) -> float:
    """Polarizer angle (degrees, in [0, 180)) of the fringe maximum.

    Uses the second-harmonic Fourier component, exact for sinusoidal fringes
    sampled uniformly over one period.  A duplicated endpoint (0 and 180) is
    dropped.
    """
    angles = np.asarray(angles_deg, dtype=float)
    curve = np.asarray(curve, dtype=float)
    if len(angles) > 1 and math.isclose((angles[-1] - angles[0]) % 180.0, 0.0, abs_tol=1e-9):
        angles, curve = angles[:-1], curve[:-1]
    c = np.sum(curve * np.exp(2j * np.radians(angles)))
    phase = float(np.degrees(np.angle(c)) / 2.0) % 180.0
    # a phase of -1e-15 wraps to 180.0 in floating point
    return 0.0 if phase > 180.0 - 1e-9 else phase


def qubit_overlap(ket: Ket, lines: Sequence[str], target) -> float:
    """Polarization fidelity of single photons in ``lines`` with a target state.

    Only terms with exactly one photon in each listed line count.  Bins and
    all other modes are traced out.  ``target`` is a vector over the product
    (H, V) basis of the lines.
    """
    target = np.asarray(target, dtype=complex).ravel()
    target = target / np.linalg.norm(target)
    groups: dict[tuple, np.ndarray] = {}
    line_idx = [_indices(ket, l) for l in lines]
    line_set = set(i for ids in line_idx for i in ids)
    total = 0.0
    for occ, amp in ket:
        pols, bins = [], []
        ok = True
        for ids in line_idx:
            occupied = [i for i in ids if occ[i]]
            if len(occupied) != 1 or occ[occupied[0]] != 1:
                ok = False
                break
            m = ket.modes[occupied[0]]
            pols.append(0 if m.polarization == "H" else 1)
            bins.append(m.temporal_bin)
        if not ok:
            continue
        env = tuple(n for i, n in enumerate(occ) if i not in line_set) + tuple(bins)
        vec = groups.setdefault(env, np.zeros(2 ** len(lines), dtype=complex))
        k = 0
        for p in pols:
            k = 2 * k + p
        vec[k] += amp
        total += abs(amp) ** 2
    if total == 0:
        raise DetectionError("no single-photon support on the requested lines")
    hit = sum(abs(np.vdot(target, v)) ** 2 for v in groups.values())
    return float(hit / total)


def extract_qubits(ket: Ket, lines: Sequence[str], tol: float = 1e-9) -> np.ndarray:
    """Polarization amplitudes of single bin-0 photons in ``lines``.

    The ket must factor as (environment) x (qubits).  The phase is fixed by
    reading the qubit amplitudes at the largest environment component, so
    repeated extraction from states sharing an environment is phase-consistent.
    Returns the unnormalized vector over the product (H, V) basis.
    """
    line_idx = [_indices(ket, l) for l in lines]
    line_set = set(i for ids in line_idx for i in ids)
    groups: dict[tuple, np.ndarray] = {}
    for occ, amp in ket:
        k = 0
        for ids in line_idx:
            occupied = [i for i in ids if occ[i]]
            if len(occupied) != 1 or occ[occupied[0]] != 1:
                raise DetectionError("line does not hold exactly one photon")
            m = ket.modes[occupied[0]]
            if m.temporal_bin != 0:
                raise DetectionError("photon outside the principal temporal bin")
            k = 2 * k + (0 if m.polarization == "H" else 1)
        env = tuple(n for i, n in enumerate(occ) if i not in line_set)
        groups.setdefault(env, np.zeros(2 ** len(lines), dtype=complex))[k] += amp
    if not groups:
        raise DetectionError("empty state")
    envs = sorted(groups)
    mat = np.array([groups[e] for e in envs])
    s = np.linalg.svd(mat, compute_uv=False)
    if len(s) > 1 and s[1] > tol * max(s[0], 1e-300):
        raise DetectionError("qubits are entangled with the environment")
    best = max(range(len(envs)), key=lambda n: (round(np.linalg.norm(mat[n]), 12), -n))
    ref = mat[best]
    env_amp = np.linalg.norm(ref)
    # mat = e (outer) q; reading row ``best`` gives e_best * q
    scale = s[0] / env_amp
    return ref * scale


def to_csv(results: Sequence[CoincidenceResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["angle_deg", "pattern", "probability"])
    for r in results:
        angle = "" if r.angle_deg is None else repr(float(r.angle_deg))
        for pattern, p in r.probabilities.items():
            w.writerow([angle, pattern, repr(float(p))])
    return buf.getvalue()


def from_csv(text: str) -> list[tuple[float | None, str, float]]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [(float(r["angle_deg"]) if r["angle_deg"] else None, r["pattern"],
             float(r["probability"])) for r in rows]
