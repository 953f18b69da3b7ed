"""Semantic validation, compilation and rendering of parsed netlists."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import fock
from ..detection import (CoincidenceResult, DetectorSpec, HeraldRule,
                         ZeroProbabilityError, coincidence_scan, herald)
from ..fock import Bell, QubitState, registry_for, tensor_all
from ..optics import ElementSpec
from ..sources import SourceSpec
from .parser import (DetStmt, ElemStmt, HeraldStmt, Loc, NetlistAst, NetlistError,
                     Param, ScanStmt, SetStmt, SourceStmt, parse)


class UndeclaredLine(NetlistError):
    code = "UndeclaredLine"


class LineNeverDetected(NetlistError):
    code = "LineNeverDetected"


class DuplicateDetector(NetlistError):
    code = "DuplicateDetector"


class ParamOutOfRange(NetlistError):
    code = "ParamOutOfRange"


class UnknownKey(NetlistError):
    code = "UnknownKey"


class UnknownKind(NetlistError):
    code = "UnknownKind"


class MissingParam(NetlistError):
    code = "MissingParam"


class InvalidValue(NetlistError):
    code = "InvalidValue"


class LineRedeclared(NetlistError):
    code = "LineRedeclared"


class LineConsumed(NetlistError):
    code = "LineConsumed"


class MultipleScans(NetlistError):
    code = "MultipleScans"


class ScanTarget(NetlistError):
    code = "ScanTarget"


SETTINGS = {"bins": 2, "nmax": fock.N_MAX, "eps": fock.EPS_AMP}

# key -> (kind of value, default); a default of None means required
SOURCE_KEYS = {
    "spdc": {"p": ("num", 0.05), "bell": ("bell", "psi-"), "order": ("order", 2)},
    "coherent": {"mu": ("num", 0.05), "pol": ("pol", "H"), "theta": ("angle", None),
                 "n": ("int", 2)},
    "single": {"pol": ("pol", "H"), "theta": ("angle", None)},
    "vacuum": {},
}
ELEM_KEYS = {
    "hwp": {"theta": ("angle", None)},
    "qwp": {"theta": ("angle", None)},
    "polarizer": {"theta": ("angle", None)},
    "mismatch": {"lambda": ("num", None)},
    "pauli": {"kind": ("pauli", None)},
    "pbs": {},
    "pbs45": {},
}
DET_KEYS = {
    "hv": {"eta": ("num", 1.0)},
    "pm": {"eta": ("num", 1.0)},
    "circ": {"eta": ("num", 1.0)},
    "pol": {"theta": ("angle", 0.0), "eta": ("num", 1.0)},
}
DET_ANALYSIS = {"hv": "HV", "pm": "PM", "circ": "CIRC", "pol": "POL"}
RANGES = {"p": (0.0, 0.1), "mu": (0.0, 1.0), "lambda": (0.0, 1.0), "n": (0, 6)}
BELL_NAMES = {"psim": "psi-", "psip": "psi+", "phim": "phi-", "phip": "phi+",
              "psi-": "psi-", "psi+": "psi+", "phi-": "phi-", "phi+": "phi+"}
BELL_RENDER = {"psi-": "psim", "psi+": "psip", "phi-": "phim", "phi+": "phip"}


def normalize_angle(theta: float) -> float:
    out = math.fmod(float(theta), 180.0)
    if out < 0:
        out += 180.0
    return 0.0 if out == 180.0 else out + 0.0


@dataclass(frozen=True)
class SourceStep:
    kind: str
    lines: tuple[str, ...]
    params: tuple[tuple[str, object], ...]
    loc: Loc | None = field(default=None, compare=False)

    def spec(self) -> SourceSpec:
        p = dict(self.params)
        if "theta" in p:
            state = QubitState.linear(p["theta"])
        else:
            state = fock.OUTCOME_STATES[p.get("pol", "H")]
        return SourceSpec(self.kind, self.lines, p=p.get("p", 0.05), mu=p.get("mu", 0.05),
                          bell=p.get("bell", "psi-"), state=state,
                          order=int(p.get("order", 2)), n_max=int(p.get("n", 2)))


@dataclass(frozen=True)
class HeraldStep:
    line: str
    outcome: str
    loc: Loc | None = field(default=None, compare=False)

    def rule(self) -> HeraldRule:
        return HeraldRule(((self.line, self.outcome),))


@dataclass(frozen=True)
class ScanSpec:
    var: str
    line: str
    start: float
    stop: float
    steps: int

    def angles(self) -> list[float]:
        return [float(x) for x in np.linspace(self.start, self.stop, self.steps)]


@dataclass(frozen=True)
class CompiledCircuit:
    bins: int = 2
    n_max: int = fock.N_MAX
    eps: float = fock.EPS_AMP
    lines: tuple[str, ...] = ()
    pipeline: tuple = ()
    detectors: tuple[DetectorSpec, ...] = ()
    scan: ScanSpec | None = None

    @property
    def heralded_lines(self) -> tuple[str, ...]:
        return tuple(s.line for s in self.pipeline if isinstance(s, HeraldStep))

    @property
    def sources(self) -> tuple[SourceStep, ...]:
        return tuple(s for s in self.pipeline if isinstance(s, SourceStep))


# -- parameter checking -------------------------------------------------------

def _check_params(params: tuple[Param, ...], schema: dict, owner: str, owner_loc: Loc):
    out = {}
    for prm in params:
        if prm.key not in schema:
            raise UnknownKey(f"unknown key {prm.key!r} for {owner} (allowed: "
                             f"{', '.join(sorted(schema)) or 'none'})",
                             prm.loc.line, prm.loc.column, len(prm.key))
        if prm.key in out:
            raise UnknownKey(f"key {prm.key!r} given twice", prm.loc.line, prm.loc.column,
                             len(prm.key))
        out[prm.key] = _convert(prm, schema[prm.key][0])
    for key, (_, default) in schema.items():
        if key not in out and default is not None:
            out[key] = default
    missing = [k for k, (_, d) in schema.items() if d is None and k not in out]
    # polarization may be given either as pol= or theta=
    if owner in ("coherent", "single") and "theta" in out:
        out.pop("pol", None)
        missing = []
    elif owner in ("coherent", "single"):
        missing = []
    if missing:
        raise MissingParam(f"{owner} needs {', '.join(missing)}=", owner_loc.line,
                           owner_loc.column, len(owner))
    return out


def _bad_value(prm: Param, what: str):
    raise InvalidValue(f"{prm.key}={prm.raw}: expected {what}", prm.value_loc.line,
                       prm.value_loc.column, len(prm.raw))


def _out_of_range(prm: Param, what: str):
    raise ParamOutOfRange(f"{prm.key}={prm.raw} out of range ({what})", prm.value_loc.line,
                          prm.value_loc.column, len(prm.raw))


def _convert(prm: Param, kind: str):
    v = prm.value
    if kind in ("num", "angle", "int", "order"):
        if not isinstance(v, float):
            _bad_value(prm, "a number")
        if kind == "angle":
            return normalize_angle(v)
        if kind in ("int", "order") and v != int(v):
            _bad_value(prm, "an integer")
        if kind == "order":
            if v not in (1, 2):
                _out_of_range(prm, "1 or 2")
            return int(v)
        lo, hi = RANGES.get(prm.key, (-math.inf, math.inf))
        if prm.key == "eta":
            lo, hi = 0.0, 1.0
            if not lo < v <= hi:
                _out_of_range(prm, "0 < eta <= 1")
        elif not lo <= v <= hi:
            _out_of_range(prm, f"{lo} to {hi}")
        return int(v) if kind == "int" else float(v)
    if kind == "bell":
        if str(v) not in BELL_NAMES:
            _bad_value(prm, "one of psim, psip, phim, phip")
        return BELL_NAMES[str(v)]
    if kind == "pol":
        if str(v) not in fock.OUTCOME_STATES:
            _bad_value(prm, "one of H, V, P, M, L, R")
        return str(v)
    if kind == "pauli":
        if str(v) not in ("X", "Y", "Z"):
            _bad_value(prm, "one of X, Y, Z")
        return str(v)
    raise AssertionError(kind)


def _settings(ast: NetlistAst) -> dict:
    out = dict(SETTINGS)
    for st in ast.statements:
        if not isinstance(st, SetStmt):
            continue
        if st.key not in SETTINGS:
            raise UnknownKey(f"unknown setting {st.key!r} (allowed: bins, eps, nmax)",
                             st.key_loc.line, st.key_loc.column, len(st.key))
        prm = Param(st.key, st.value, st.raw, st.key_loc, st.value_loc)
        if not isinstance(st.value, float):
            _bad_value(prm, "a number")
        v = st.value
        if st.key == "bins":
            if v != int(v) or not 1 <= v <= 4:
                _out_of_range(prm, "integer 1 to 4")
            v = int(v)
        elif st.key == "nmax":
            if v != int(v) or not 1 <= v <= 12:
                _out_of_range(prm, "integer 1 to 12")
            v = int(v)
        elif not 0.0 <= v < 1e-3:
            _out_of_range(prm, "0 <= eps < 1e-3")
        out[st.key] = v
    return out


# -- compilation ----------------------------------------------------------------

def validate_and_compile(ast: NetlistAst) -> CompiledCircuit:
    """Check an AST and turn it into an ordered pipeline."""
    settings = _settings(ast)
    status: dict[str, str] = {}  # live | consumed | heralded | detected
    origin: dict[str, Loc] = {}
    order: list[str] = []
    occupied: set[str] = set()
    pipeline, detectors = [], []
    scans: list[ScanStmt] = []

    def use(ref, as_detector=False):
        st = status.get(ref.name)
        if st is None:
            raise UndeclaredLine(f"line {ref.name!r} is not produced by any source or element",
                                 ref.loc.line, ref.loc.column, len(ref.name))
        if as_detector and st in ("detected", "heralded"):
            raise DuplicateDetector(f"line {ref.name!r} already has a detector",
                                    ref.loc.line, ref.loc.column, len(ref.name))
        if st != "live":
            raise LineConsumed(f"line {ref.name!r} was already {st}",
                               ref.loc.line, ref.loc.column, len(ref.name))

    def declare(ref):
        if ref.name in status:
            raise LineRedeclared(f"line {ref.name!r} already exists",
                                 ref.loc.line, ref.loc.column, len(ref.name))
        status[ref.name] = "live"
        origin[ref.name] = ref.loc
        order.append(ref.name)

    for st in ast.statements:
        if isinstance(st, SetStmt):
            continue
        if isinstance(st, SourceStmt):
            if st.kind not in SOURCE_KEYS:
                raise UnknownKind(f"unknown source kind {st.kind!r}", st.kind_loc.line,
                                  st.kind_loc.column, len(st.kind))
            params = _check_params(st.params, SOURCE_KEYS[st.kind], st.kind, st.kind_loc)
            if st.kind == "spdc" and st.lines[0].name == st.lines[1].name:
                ref = st.lines[1]
                raise LineRedeclared(f"line {ref.name!r} used twice", ref.loc.line,
                                     ref.loc.column, len(ref.name))
            for ref in st.lines:
                declare(ref)
                if st.kind != "vacuum":
                    occupied.add(ref.name)
            pipeline.append(SourceStep(st.kind, tuple(r.name for r in st.lines),
                                       tuple(sorted(params.items())), st.loc))
        elif isinstance(st, ElemStmt):
            if st.kind not in ELEM_KEYS:
                raise UnknownKind(f"unknown element kind {st.kind!r}", st.kind_loc.line,
                                  st.kind_loc.column, len(st.kind))
            params = _check_params(st.params, ELEM_KEYS[st.kind], st.kind, st.kind_loc)
            for ref in st.lines:
                use(ref)
            names = [r.name for r in st.lines]
            if len(set(names)) != len(names):
                ref = st.lines[1]
                raise LineRedeclared(f"line {ref.name!r} used twice", ref.loc.line,
                                     ref.loc.column, len(ref.name))
            if st.outputs and len(st.lines) == 1:
                ref = st.outputs[0]
                raise LineRedeclared("single-line elements act in place", ref.loc.line,
                                     ref.loc.column, len(ref.name))
            if st.kind == "mismatch" and settings["bins"] < 2:
                prm = next(p for p in st.params if p.key == "lambda")
                raise ParamOutOfRange("mismatch needs bins >= 2", prm.loc.line,
                                      prm.loc.column, len(prm.key))
            outs = [r.name for r in st.outputs] or names
            if len(set(outs)) != len(outs):
                ref = st.outputs[1]
                raise LineRedeclared(f"line {ref.name!r} used twice", ref.loc.line,
                                     ref.loc.column, len(ref.name))
            was_occupied = any(n in occupied for n in names)
            for src, ref in zip(st.lines, st.outputs):
                if ref.name == src.name:
                    continue
                if ref.name in names:
                    raise LineRedeclared(f"output {ref.name!r} must be a new name or act "
                                         "in place", ref.loc.line, ref.loc.column, len(ref.name))
                declare(ref)
                status[src.name] = "consumed"
            if was_occupied:
                occupied.update(outs)
            spec = ElementSpec(st.kind, tuple(names),
                               tuple(outs) if st.outputs and tuple(outs) != tuple(names) else (),
                               angle_deg=params.get("theta"), overlap=params.get("lambda"),
                               pauli=params.get("kind"))
            pipeline.append(spec)
        elif isinstance(st, HeraldStmt):
            use(st.line, as_detector=True)
            status[st.line.name] = "heralded"
            pipeline.append(HeraldStep(st.line.name, st.outcome, st.loc))
        elif isinstance(st, DetStmt):
            if st.kind not in DET_KEYS:
                raise UnknownKind(f"unknown detector kind {st.kind!r}", st.kind_loc.line,
                                  st.kind_loc.column, len(st.kind))
            params = _check_params(st.params, DET_KEYS[st.kind], st.kind, st.kind_loc)
            use(st.line, as_detector=True)
            status[st.line.name] = "detected"
            detectors.append(DetectorSpec(st.line.name, DET_ANALYSIS[st.kind],
                                          params.get("theta"), params["eta"]))
        elif isinstance(st, ScanStmt):
            scans.append(st)
            if len(scans) > 1:
                raise MultipleScans("only one scan per netlist", st.loc.line, st.loc.column, 4)
            if st.var != "theta":
                raise UnknownKey(f"cannot scan {st.var!r} (only theta)", st.var_loc.line,
                                 st.var_loc.column, len(st.var))
            if st.steps < 2:
                raise ParamOutOfRange("scan needs at least 2 steps", st.steps_loc.line,
                                      st.steps_loc.column, len(str(st.steps)))

    for name in order:
        if status[name] == "live" and name in occupied:
            loc = origin[name]
            raise LineNeverDetected(f"line {name!r} carries photons but has no detector",
                                    loc.line, loc.column, len(name))

    scan = None
    if scans:
        st = scans[0]
        det = next((d for d in detectors if d.line == st.line.name), None)
        if det is None or det.analysis != "POL":
            raise ScanTarget(f"scan line {st.line.name!r} needs a 'det pol' detector",
                             st.line.loc.line, st.line.loc.column, len(st.line.name))
        scan = ScanSpec(st.var, st.line.name, st.start, st.stop, st.steps)

    return CompiledCircuit(settings["bins"], settings["nmax"], settings["eps"],
                           tuple(order), tuple(pipeline), tuple(detectors), scan)


def compile_text(text: str | bytes) -> CompiledCircuit:
    return validate_and_compile(parse(text))


# -- rendering -----------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render(circuit: CompiledCircuit) -> str:
    """Canonical text; ``parse`` + ``validate_and_compile`` gives back an equal circuit."""
    out = []
    for key, default in SETTINGS.items():
        value = {"bins": circuit.bins, "nmax": circuit.n_max, "eps": circuit.eps}[key]
        if value != default:
            out.append(f"set {key} = {_fmt(value)}")
    for step in circuit.pipeline:
        if isinstance(step, SourceStep):
            kv = []
            for k, v in step.params:
                if k == "bell":
                    v = BELL_RENDER[v]
                kv.append(f"{k}={_fmt(v)}")
            out.append(" ".join(["source", step.kind, *step.lines, *kv]))
        elif isinstance(step, HeraldStep):
            out.append(f"herald {step.line} {step.outcome}")
        else:
            words = ["elem", step.kind, *step.lines]
            if step.outputs:
                words += ["->", *step.outputs]
            if step.angle_deg is not None:
                words.append(f"theta={_fmt(step.angle_deg)}")
            if step.overlap is not None:
                words.append(f"lambda={_fmt(float(step.overlap))}")
            if step.pauli is not None:
                words.append(f"kind={step.pauli}")
            out.append(" ".join(words))
    inverse = {v: k for k, v in DET_ANALYSIS.items()}
    for d in circuit.detectors:
        words = ["det", inverse[d.analysis], d.line, f"eta={_fmt(float(d.efficiency))}"]
        if d.analysis == "POL":
            words.append(f"theta={_fmt(d.theta)}")
        out.append(" ".join(words))
    if circuit.scan is not None:
        s = circuit.scan
        out.append(f"scan {s.var} on {s.line} from {_fmt(float(s.start))} "
                   f"to {_fmt(float(s.stop))} steps {s.steps}")
    return "\n".join(out) + ("\n" if out else "")


# -- execution ------------------------------------------------------------------------

def simulate(circuit: CompiledCircuit):
    """Prepare the sources, run the pipeline and apply heralds.

    Returns ``(ket, probability)`` where the probability accumulates
    post-selecting polarizers and heralds.  Raises
    :class:`ZeroProbabilityError` if the pipeline can never succeed.
    """
    bins = circuit.bins
    sources = [s.spec().build(bins) for s in circuit.sources]
    modes = registry_for(circuit.lines, bins)
    if sources:
        ket = tensor_all(sources, n_max=circuit.n_max).extend(modes).normalize()
    else:
        ket = fock.Ket.vacuum(modes)
    prob = 1.0
    for step in circuit.pipeline:
        if isinstance(step, SourceStep):
            continue
        if isinstance(step, HeraldStep):
            ket, p = herald(ket, step.rule())
        else:
            ket, p = step.apply(ket, prune=circuit.eps)
        if ket is None:
            raise ZeroProbabilityError(f"pipeline step {step} never succeeds")
        prob *= p
    return ket, prob


def run(circuit: CompiledCircuit, keep_states: bool = False) -> list[CoincidenceResult]:
    ket, prob = simulate(circuit)
    scan = (circuit.scan.line, circuit.scan.angles()) if circuit.scan else None
    return coincidence_scan(ket, circuit.detectors, scan=scan,
                            ignore_lines=circuit.heralded_lines,
                            keep_states=keep_states, herald_probability=prob)
