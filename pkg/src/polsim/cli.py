"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 netlist diagnostic, 3 zero-probability
herald.  Output is deterministic; ``--format csv`` flattens the same JSON
document into ``key,value`` rows (netlist runs use the coincidence CSV).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fock
from .detection import ZeroProbabilityError, to_csv
from .experiments import (NoiseConfig, apply_feedforward, classical_baseline,
                          run_cnot_truth_table, run_entangling_fringe,
                          run_teleportation)
from .netlist import compile_text, corpus_path
from .netlist import run as run_netlist
from .netlist.parser import NetlistError

EXIT_OK, EXIT_USAGE, EXIT_NETLIST, EXIT_ZERO = 0, 1, 2, 3
EXPERIMENTS = ("cnot-table", "entangle-fringe", "teleport", "classical-baseline")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class RunConfig:
    command: str
    target: str | None
    noise: NoiseConfig
    fmt: str
    out: str | None
    grid: tuple[float, float, int] | None
    seed: int


def parse_grid(text: str) -> tuple[float, float, int]:
    """``start:stop:steps`` in degrees, end-inclusive."""
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"grid must be start:stop:steps, got {text!r}")
    try:
        start, stop = float(parts[0]), float(parts[1])
        steps = int(parts[2])
    except ValueError:
        raise UsageError(f"grid must be start:stop:steps, got {text!r}") from None
    if not (math.isfinite(start) and math.isfinite(stop)):
        raise UsageError("grid bounds must be finite")
    if steps < 2:
        raise UsageError("grid needs at least 2 steps")
    return start, stop, steps


def grid_angles(grid) -> list[float] | None:
    if grid is None:
        return None
    start, stop, steps = grid
    return [float(x) for x in np.linspace(start, stop, steps)]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="polsim", description="Polarization linear-optics simulator.")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    def common(p):
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--out", help="write here instead of stdout")

    def noisy(p):
        p.add_argument("--lambda23", type=float, default=1.0, help="overlap amplitude at PBS")
        p.add_argument("--lambda45", type=float, default=1.0, help="overlap amplitude at PBS45")
        p.add_argument("--pair-prob", type=float, default=0.0,
                       help="SPDC pair probability (0 = ideal Bell pairs)")
        p.add_argument("--mu", type=float, default=0.0,
                       help="weak-coherent mean photon number (0 = single photon)")
        p.add_argument("--order", type=int, default=2, help="SPDC emission order (1 or 2)")
        p.add_argument("--grid", help="polarizer grid start:stop:steps in degrees")

    p = sub.add_parser("run", help="simulate a netlist and print coincidences")
    p.add_argument("netlist")
    common(p)
    p = sub.add_parser("check", help="validate a netlist")
    p.add_argument("netlist")
    p = sub.add_parser("cnot-table", help="CNOT truth table in the H/V basis")
    common(p)
    noisy(p)
    p = sub.add_parser("entangle-fringe", help="|-> control, |H> target, P2 fringe")
    common(p)
    noisy(p)
    p = sub.add_parser("teleport", help="teleportation with complete Bell analysis")
    common(p)
    noisy(p)
    p.add_argument("--input", default="L", choices=sorted(fock.OUTCOME_STATES),
                   help="input polarization (default L = (H - iV)/sqrt2)")
    p = sub.add_parser("classical-baseline", help="measure-and-resend benchmark")
    common(p)
    p.add_argument("--samples", type=int, help="Monte-Carlo samples (default: exact)")
    p.add_argument("--seed", type=int, default=0)
    return parser


# -- serialization ------------------------------------------------------------

def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, type(None), str)):
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    value = float(obj)
    return value if math.isfinite(value) else None


def flatten(doc, prefix: str = "") -> list[tuple[str, object]]:
    """Leaves of a JSON document as ``(dotted.path, value)`` pairs."""
    if isinstance(doc, dict):
        items = doc.items()
    elif isinstance(doc, list):
        items = enumerate(doc)
    else:
        return [(prefix, doc)]
    out = []
    for k, v in items:
        out.extend(flatten(v, f"{prefix}.{k}" if prefix else str(k)))
    return out


def _csv_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_json(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def to_flat_csv(doc) -> str:
    lines = ["key,value"]
    for key, value in flatten(doc):
        lines.append(f"{key},{_csv_value(value)}")
    return "\n".join(lines) + "\n"


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# -- commands -------------------------------------------------------------------

def _noise(args) -> NoiseConfig:
    try:
        return NoiseConfig(args.lambda23, args.lambda45, args.pair_prob, args.mu, args.order)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _read_netlist(name: str) -> tuple[str, bytes]:
    path = Path(name)
    if not path.exists():
        bundled = corpus_path(name)
        if bundled.is_file():
            return name, bundled.read_bytes()
        raise UsageError(f"no such netlist: {name}")
    return name, path.read_bytes()


def experiment_document(command: str, args) -> dict:
    if command == "classical-baseline":
        if args.samples is not None and args.samples < 1:
            raise UsageError("--samples must be positive")
        value = classical_baseline(args.samples, args.seed)
        return {
            "experiment": "classical-baseline",
            "noise": None,
            "tables": {"samples": args.samples, "seed": args.seed},
            "curves": {},
            "summary": {"fidelity": value, "visibility": None, "herald_prob": None},
        }
    noise = _noise(args)
    grid = grid_angles(parse_grid(args.grid)) if args.grid else None
    if command == "cnot-table":
        return run_cnot_truth_table(noise).to_dict()
    if command == "entangle-fringe":
        return run_entangling_fringe(noise, grid).to_dict()
    result = run_teleportation(fock.OUTCOME_STATES[args.input], noise, grid)
    doc = result.to_dict()
    ff = apply_feedforward(result)
    doc["tables"]["feedforward"] = {"fidelities": ff.fidelities,
                                    "average_fidelity": ff.average_fidelity}
    return doc


def netlist_document(name: str, results) -> dict:
    return {
        "netlist": name,
        "herald_prob": results[0].herald_probability if results else None,
        "results": [{"angle_deg": r.angle_deg, "probabilities": r.probabilities}
                    for r in results],
    }


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command in ("run", "check"):
            name, data = _read_netlist(args.netlist)
            try:
                circuit = compile_text(data)
            except NetlistError as exc:
                print(exc.format(name), file=sys.stderr)
                return EXIT_NETLIST
            if args.command == "check":
                print(f"{name}: ok ({len(circuit.pipeline)} pipeline steps, "
                      f"{len(circuit.detectors)} detectors)")
                return EXIT_OK
            results = run_netlist(circuit)
            if args.format == "csv":
                _emit(to_csv(results), args.out)
            else:
                _emit(to_json(_clean(netlist_document(name, results))), args.out)
            return EXIT_OK
        doc = _clean(experiment_document(args.command, args))
        _emit(to_json(doc) if args.format == "json" else to_flat_csv(doc), args.out)
        return EXIT_OK
    except UsageError as exc:
        print(f"polsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ZeroProbabilityError as exc:
        print(f"polsim: zero-probability herald: {exc}", file=sys.stderr)
        return EXIT_ZERO


if __name__ == "__main__":
    sys.exit(main())
