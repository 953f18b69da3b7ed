"""Reproductions of the heralded CNOT experiments.

The gate: control photon on line 2, target on line 5, ancilla pair
``|Psi->_34``.  PBS on (2, 3) -> (2p, 3p), +/- basis PBS on (4, 5) -> (4p, 5p),
heralded on a ``|->`` photon in 3p and an ``|H>`` photon in 4p.  Imperfect
temporal overlap enters as bin-mixing on lines 3 and 5 just before the two
beamsplitter junctions.

Noise knobs live in :class:`NoiseConfig`.  ``pair_prob == 0`` selects ideal
pair sources (one Bell pair, the p -> 0 limit of the post-selected
statistics) and ``mu == 0`` an ideal single-photon target.  With a real SPDC
source the control photon is prepared by a polarizer on its twin (line 1),
and every reported number is a fraction of five-fold coincidences.
"""

from __future__ import annotations

import functools
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import fock
from .detection import (HeraldRule, ZeroProbabilityError, extract_qubits,
                        fire_probability, fires, fringe_phase, herald,
                        qubit_overlap, visibility)
from .fock import (MINUS, PLUS, Bell, Ket, QubitState, make_bell, project,
                   registry_for, tensor_all)
from .optics import ElementSpec, apply_polarization, pauli, qwp
from .sources import single_photon, spdc_pair, vacuum, weak_coherent

LINES = ("1", "2", "3", "4", "5", "2p", "3p", "4p", "5p")
HERALD = HeraldRule((("3p", "M"), ("4p", "H")))

# overlap amplitudes whose squares are the reported interference visibilities
LAMBDA23_BRACKET = math.sqrt(0.82)
LAMBDA45_BRACKET = math.sqrt(0.68)

CNOT = np.array([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]], dtype=complex)
BASIS = ("HH", "HV", "VH", "VV")

BELL_OUTCOMES = {  # (2p analyzer, 5p analyzer) -> Bell state of (2, 5)
    ("M", "H"): "psi-",
    ("P", "H"): "psi+",
    ("P", "V"): "phi+",
    ("M", "V"): "phi-",
}
FEEDFORWARD = {"psi-": "I", "psi+": "Z", "phi+": "XZ", "phi-": "X"}


@dataclass(frozen=True)
class NoiseConfig:
    lambda23: float = 1.0
    lambda45: float = 1.0
    pair_prob: float = 0.0
    mu: float = 0.0
    spdc_order: int = 2

    def __post_init__(self):
        for name in ("lambda23", "lambda45"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0.0 <= self.pair_prob <= 0.1:
            raise ValueError("pair_prob must lie in [0, 0.1]")
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError("mu must lie in [0, 1]")
        if self.spdc_order not in (1, 2):
            raise ValueError("spdc_order must be 1 or 2")

    @classmethod
    def ideal(cls) -> "NoiseConfig":
        return cls()

    @classmethod
    def bracket(cls, pair_prob: float = 0.05) -> "NoiseConfig":
        """Overlaps from the reported 0.82 / 0.68 visibilities, mu = 0.05."""
        return cls(LAMBDA23_BRACKET, LAMBDA45_BRACKET, pair_prob, 0.05, 2)

    @property
    def is_ideal(self) -> bool:
        return (self.lambda23 == 1.0 and self.lambda45 == 1.0
                and self.pair_prob == 0.0 and self.mu == 0.0)

    def to_dict(self) -> dict:
        return asdict(self)


# -- circuit -----------------------------------------------------------------

def _pair(i: str, j: str, noise: NoiseConfig) -> Ket:
    if noise.pair_prob == 0:
        return make_bell(Bell.PSI_MINUS, i, j)
    return spdc_pair(i, j, noise.pair_prob, noise.spdc_order)


def _target(state: QubitState, noise: NoiseConfig) -> Ket:
    if noise.mu == 0:
        return single_photon("5", state.alpha, state.beta)
    return weak_coherent("5", state, noise.mu, n_max=2)


def prep_setting(control: QubitState) -> QubitState:
    """Polarizer setting on line 1 that leaves line 2 in ``control`` (pair in Psi-)."""
    return QubitState(control.beta.conjugate(), -control.alpha.conjugate())


def gate_elements(noise: NoiseConfig) -> list[ElementSpec]:
    return [
        ElementSpec("mismatch", ("3",), overlap=noise.lambda23),
        ElementSpec("mismatch", ("5",), overlap=noise.lambda45),
        ElementSpec("pbs", ("2", "3"), ("2p", "3p")),
        ElementSpec("pbs45", ("4", "5"), ("4p", "5p")),
    ]


def _assemble(parts: list[Ket], min_photons: int) -> Ket:
    state = tensor_all(parts, n_max=fock.N_MAX)
    state = state.extend(registry_for(LINES))
    # post-selection needs one photon per detected line; photon number is
    # conserved by every element, so lower sectors never contribute
    return state.filter(lambda occ: sum(occ) >= min_photons)


def _run_gate(state: Ket, noise: NoiseConfig) -> Ket:
    for el in gate_elements(noise):
        state, _ = el.apply(state)
    return state


def _present(ket: Ket, line: str):
    idx = [i for i, m in enumerate(ket.modes) if m.spatial == line]
    return lambda occ: any(occ[i] for i in idx)


def _exactly_one(ket: Ket, line: str):
    idx = [i for i, m in enumerate(ket.modes) if m.spatial == line]
    return lambda occ: sum(occ[i] for i in idx) == 1


def _herald_conditioned(raw: Ket, line1: QubitState | None, present=("2p", "5p")):
    """Condition on a five-fold (or four-fold) coincidence with any ancilla pattern,
    then on the herald pattern.  Returns ``(ket, herald_probability)``.
    """
    ket = raw
    if line1 is not None:
        ket, p = fires(ket, "1", line1)
        if ket is None:
            raise ZeroProbabilityError("line-1 detector never fires")
    checks = [_present(ket, l) for l in present]
    checks += [_exactly_one(ket, "3p"), _exactly_one(ket, "4p")]
    ket, p = project(ket, lambda occ: all(c(occ) for c in checks))
    if ket is None:
        raise ZeroProbabilityError("no coincidence possible")
    ket, ph = herald(ket, HERALD)
    if ket is None:
        raise ZeroProbabilityError("zero-probability herald")
    return ket, ph


@functools.lru_cache(maxsize=None)
def herald_correction() -> tuple[np.ndarray, np.ndarray]:
    """Fixed local unitaries (on 2p, 5p) that turn the heralded map into CNOT.

    Solved once from the four ideal basis inputs.  The heralded map must equal
    ``c (A x B) CNOT`` for a single pair of local unitaries; anything else
    (an input-dependent correction) raises.
    """
    noise = NoiseConfig.ideal()
    cols = []
    for label in BASIS:
        c, t = fock.OUTCOME_STATES[label[0]], fock.OUTCOME_STATES[label[1]]
        parts = [single_photon("2", c.alpha, c.beta), _pair("3", "4", noise), _target(t, noise)]
        raw = _run_gate(_assemble(parts, 4), noise)
        ket, p = herald(raw, HERALD)
        cols.append(extract_qubits(ket, ["2p", "5p"]) * math.sqrt(p))
    M = np.array(cols).T
    K = M @ CNOT
    R = K.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
    u, s, vh = np.linalg.svd(R)
    if s[1] > 1e-9 * s[0]:
        raise RuntimeError("heralded map is not a local correction of CNOT")
    A, B = u[:, 0].reshape(2, 2), vh[0, :].reshape(2, 2)
    A = A / math.sqrt(np.trace(A @ A.conj().T).real / 2)
    B = B / math.sqrt(np.trace(B @ B.conj().T).real / 2)
    return A.conj().T, B.conj().T


def _correct(ket: Ket) -> Ket:
    A, B = herald_correction()
    ket = apply_polarization(ket, "2p", A)
    return apply_polarization(ket, "5p", B)


def heralded_output(control: QubitState | None, target: QubitState, noise: NoiseConfig,
                    teleport: bool = False):
    """Heralded, corrected state and the herald probability.

    ``control=None`` with ``teleport=True`` uses photon 2 of the pair (1, 2)
    as the control; line 1 is then left unmeasured.
    """
    if teleport:
        parts = [_pair("1", "2", noise), _pair("3", "4", noise), _target(target, noise)]
        raw = _run_gate(_assemble(parts, 5), noise)
        ket, ph = _herald_conditioned(raw, None, present=("1", "2p", "5p"))
        return _correct(ket), ph, None
    if noise.pair_prob == 0:
        parts = [single_photon("2", control.alpha, control.beta),
                 _pair("3", "4", noise), _target(target, noise)]
        raw = _run_gate(_assemble(parts, 4), noise)
        ket, ph = _herald_conditioned(raw, None)
        return _correct(ket), ph, None
    prep = prep_setting(control)
    parts = [_pair("1", "2", noise), _pair("3", "4", noise), _target(target, noise)]
    raw = _run_gate(_assemble(parts, 5), noise)
    ket, ph = _herald_conditioned(raw, prep)
    return _correct(ket), ph, prep


# -- truth table -------------------------------------------------------------

@dataclass
class TruthTableResult:
    table: dict[str, dict[str, float]]
    herald_prob: dict[str, float]
    fidelity: float
    worst_row_fidelity: float
    noise: NoiseConfig

    def correct_output(self, inp: str) -> str:
        return expected_cnot_output(inp)

    def to_dict(self) -> dict:
        return {
            "experiment": "cnot-table",
            "noise": self.noise.to_dict(),
            "tables": {"truth_table": self.table, "herald_prob": self.herald_prob},
            "curves": {},
            "summary": {
                "fidelity": self.fidelity,
                "worst_row_fidelity": self.worst_row_fidelity,
                "visibility": None,
                "herald_prob": float(np.mean(list(self.herald_prob.values()))),
            },
        }


def expected_cnot_output(inp: str) -> str:
    """Logic table with H as logic 1: an H control flips the target."""
    c, t = inp
    if c == "H":
        t = "V" if t == "H" else "H"
    return c + t


def run_cnot_truth_table(noise: NoiseConfig | None = None) -> TruthTableResult:
    noise = noise or NoiseConfig.ideal()
    table, heralds = {}, {}
    for inp in BASIS:
        c, t = fock.OUTCOME_STATES[inp[0]], fock.OUTCOME_STATES[inp[1]]
        ket, ph, _ = heralded_output(c, t, noise)
        row = {}
        for out in BASIS:
            row[out] = fire_probability(ket, [("2p", fock.OUTCOME_STATES[out[0]]),
                                              ("5p", fock.OUTCOME_STATES[out[1]])])
        total = sum(row.values())
        if total == 0:
            raise ZeroProbabilityError(f"no H/V coincidences for input {inp}")
        table[inp] = {k: v / total for k, v in row.items()}
        heralds[inp] = ph
    correct = [table[i][expected_cnot_output(i)] for i in BASIS]
    return TruthTableResult(table, heralds, float(np.mean(correct)), float(min(correct)), noise)


# -- entangling run ----------------------------------------------------------

@dataclass
class EntanglingResult:
    angles: list[float]
    curve: list[float]
    visibility: float
    hv_patterns: dict[str, float]
    unwanted_prob: float
    bell_fidelity: float
    herald_prob: float
    noise: NoiseConfig

    @property
    def signal_to_noise(self) -> float:
        if self.unwanted_prob == 0:
            return math.inf
        return (1.0 - self.unwanted_prob) / self.unwanted_prob

    @property
    def minimum_angle(self) -> float:
        return self.angles[int(np.argmin(self.curve))]

    def to_dict(self) -> dict:
        snr = self.signal_to_noise
        return {
            "experiment": "entangle-fringe",
            "noise": self.noise.to_dict(),
            "tables": {"hv_patterns": self.hv_patterns},
            "curves": {"fringe": {"angle_deg": self.angles, "probability": self.curve}},
            "summary": {
                "fidelity": self.bell_fidelity,
                "visibility": self.visibility,
                "herald_prob": self.herald_prob,
                "unwanted_prob": self.unwanted_prob,
                "signal_to_noise": None if math.isinf(snr) else snr,
            },
        }


def run_entangling_fringe(noise: NoiseConfig | None = None, grid=None,
                          fixed_angle: float = 45.0) -> EntanglingResult:
    """Control ``|->``, target ``|H>``; scan polarizer P2 with P5 fixed."""
    noise = noise or NoiseConfig.ideal()
    angles = [float(a) for a in (np.linspace(0, 180, 37) if grid is None else grid)]
    ket, ph, _ = heralded_output(MINUS, fock.H, noise)

    hv = {}
    for out in BASIS:
        hv[out] = fire_probability(ket, [("2p", fock.OUTCOME_STATES[out[0]]),
                                         ("5p", fock.OUTCOME_STATES[out[1]])])
    total = sum(hv.values())
    hv = {k: v / total for k, v in hv.items()}
    unwanted = hv["HH"] + hv["VV"]

    fixed, p5 = fires(ket, "5p", QubitState.linear(fixed_angle))
    if fixed is None:
        raise ZeroProbabilityError("P5 never fires")
    curve = [p5 * fire_probability(fixed, [("2p", QubitState.linear(a))]) for a in angles]
    vis = visibility(curve)
    fid = qubit_overlap(ket, ["2p", "5p"], Bell.PSI_MINUS.vector())
    return EntanglingResult(angles, curve, vis, hv, unwanted, fid, ph, noise)


# -- teleportation -------------------------------------------------------------

def teleport_target(bell: str, state: QubitState) -> QubitState:
    """State of photon 1 after projecting (2, 5) onto ``bell``, pair (1, 2) in Psi-."""
    a, b = state.alpha, state.beta
    return {
        "psi-": QubitState(a, b),
        "psi+": QubitState(a, -b),
        "phi+": QubitState(-b, a),
        "phi-": QubitState(b, a),
    }[bell]


def _needs_qwp(state: QubitState) -> bool:
    return abs((state.alpha.conjugate() * state.beta).imag) > 1e-12


@dataclass
class BranchResult:
    bell: str
    probability: float
    target: QubitState
    fidelity: float
    curve: list[float]
    conditional: QubitState | None
    ket: Ket = field(repr=False)


@dataclass
class TeleportResult:
    input_state: QubitState
    angles: list[float]
    branches: dict[str, BranchResult]
    average_fidelity: float
    herald_prob: float
    qwp_analysis: bool
    noise: NoiseConfig

    def fringe_offset(self, a: str = "psi+", b: str = "psi-") -> float:
        """Difference of the fringe maxima of two branches, in polarizer degrees."""
        pa = fringe_phase(self.angles, self.branches[a].curve)
        pb = fringe_phase(self.angles, self.branches[b].curve)
        return (pa - pb) % 180.0

    def to_dict(self) -> dict:
        return {
            "experiment": "teleport",
            "noise": self.noise.to_dict(),
            "tables": {
                "input": [_cplx(self.input_state.alpha), _cplx(self.input_state.beta)],
                "branches": {
                    k: {"probability": br.probability, "fidelity": br.fidelity,
                        "target": [_cplx(br.target.alpha), _cplx(br.target.beta)]}
                    for k, br in self.branches.items()
                },
            },
            "curves": {k: {"angle_deg": self.angles, "probability": br.curve}
                       for k, br in self.branches.items()},
            "summary": {
                "fidelity": self.average_fidelity,
                "visibility": float(np.mean([visibility(br.curve) for br in self.branches.values()])),
                "herald_prob": self.herald_prob,
            },
        }


def _cplx(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def _line1_fidelity(ket: Ket, target: QubitState) -> float:
    hit = fire_probability(ket, [("1", target)])
    miss = fire_probability(ket, [("1", target.orthogonal())])
    return hit / (hit + miss)


def _conditional_qubit(ket: Ket) -> QubitState | None:
    try:
        vec = extract_qubits(ket, ["1"])
    except ValueError:
        return None
    return QubitState.from_vector(vec)


def run_teleportation(state: QubitState | None = None, noise: NoiseConfig | None = None,
                      grid=None) -> TeleportResult:
    """Bell-state analysis through the CNOT and the state left on photon 1."""
    state = state or fock.LEFT
    noise = noise or NoiseConfig.ideal()
    angles = [float(a) for a in (np.linspace(0, 180, 37) if grid is None else grid)]
    use_qwp = _needs_qwp(state)
    ket, ph, _ = heralded_output(None, state, noise, teleport=True)

    raw = {}
    for (x, y), bell in BELL_OUTCOMES.items():
        br, p2 = fires(ket, "2p", fock.OUTCOME_STATES[x])
        if br is None:
            raw[bell] = (None, 0.0)
            continue
        br, p5 = fires(br, "5p", fock.OUTCOME_STATES[y])
        raw[bell] = (br, p2 * p5 if br is not None else 0.0)
    total = sum(w for _, w in raw.values())
    if total == 0:
        raise ZeroProbabilityError("no Bell-state analyzer coincidences")

    branches = {}
    for bell, (br, w) in raw.items():
        target = teleport_target(bell, state)
        if br is None:
            branches[bell] = BranchResult(bell, 0.0, target, float("nan"),
                                          [0.0] * len(angles), None, None)
            continue
        prob = w / total
        analysed = apply_polarization(br, "1", qwp(45.0)) if use_qwp else br
        curve = [prob * fire_probability(analysed, [("1", QubitState.linear(a))])
                 for a in angles]
        branches[bell] = BranchResult(bell, prob, target, _line1_fidelity(br, target),
                                      curve, _conditional_qubit(br), br)
    avg = sum(b.probability * b.fidelity for b in branches.values() if b.probability > 0)
    return TeleportResult(state, angles, branches, float(avg), ph, use_qwp, noise)


@dataclass
class FeedforwardResult:
    states: dict[str, QubitState | None]
    fidelities: dict[str, float]
    average_fidelity: float


def feedforward_matrix(bell: str) -> np.ndarray:
    """Outcome-indexed Pauli correction; "XZ" applies Z first, then X."""
    out = np.eye(2, dtype=complex)
    for p in reversed(FEEDFORWARD[bell]):
        out = pauli(p) @ out
    return out


def apply_feedforward(result: TeleportResult) -> FeedforwardResult:
    """Apply the conditional Pauli to photon 1 in every branch."""
    states, fids = {}, {}
    avg = 0.0
    for bell, br in result.branches.items():
        if br.ket is None:
            states[bell], fids[bell] = None, float("nan")
            continue
        fixed = apply_polarization(br.ket, "1", feedforward_matrix(bell))
        states[bell] = _conditional_qubit(fixed)
        fids[bell] = _line1_fidelity(fixed, result.input_state)
        avg += br.probability * fids[bell]
    return FeedforwardResult(states, fids, float(avg))


# -- classical benchmark ---------------------------------------------------------

def _haar_qubits(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.normal(size=(n, 2)) + 1j * rng.normal(size=(n, 2))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def classical_baseline(n_samples: int | None = None, seed: int = 0) -> float:
    """Average fidelity of measure-and-resend in a uniformly random basis.

    ``n_samples=None`` returns the exact value, 2/3.
    """
    if n_samples is None:
        return 2.0 / 3.0
    rng = np.random.default_rng(seed)
    psi = _haar_qubits(rng, n_samples)
    basis = _haar_qubits(rng, n_samples)
    c = np.abs(np.sum(basis.conj() * psi, axis=1)) ** 2
    hit = rng.random(n_samples) < c
    # resend |basis> on a hit, the orthogonal state otherwise
    fid = np.where(hit, c, 1.0 - c)
    return float(np.mean(fid))


def fixed_input_fidelity(state: QubitState, basis: QubitState) -> float:
    """Expected measure-and-resend fidelity for one input and one basis."""
    c = state.overlap(basis)
    return c * c + (1 - c) * (1 - c)
