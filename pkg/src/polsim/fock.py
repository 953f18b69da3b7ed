"""Sparse multi-mode bosonic states.

A :class:`Ket` is a sparse map from occupation tuples to complex amplitudes
over an ordered registry of :class:`ModeLabel` objects.  Every mode is a
(spatial line, polarization, temporal bin) triple and the registry is always
kept in canonical order, i.e. sorted lexicographically on that triple.

Linear-optical elements act on a ket through :func:`apply_mode_unitary`,
which substitutes each creation operator by a linear combination of creation
operators and re-expands the resulting polynomial.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

N_MAX = 6
EPS_AMP = 1e-14
N_BINS = 2
UNITARY_TOL = 1e-10

POLARIZATIONS = ("H", "V")


class RegistryError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class ModeLabel:
    spatial: str
    polarization: str
    temporal_bin: int = 0

    def __post_init__(self):
        if self.polarization not in POLARIZATIONS:
            raise ValueError(f"polarization must be H or V, got {self.polarization!r}")
        if self.temporal_bin < 0:
            raise ValueError("temporal_bin must be non-negative")

    def __str__(self):
        return f"{self.spatial}{self.polarization}{self.temporal_bin}"


def line_modes(line: str, bins: int = N_BINS) -> tuple[ModeLabel, ...]:
    """All modes of one spatial line, in canonical order."""
    return tuple(ModeLabel(str(line), pol, b) for pol in POLARIZATIONS for b in range(bins))


def registry_for(lines: Iterable[str], bins: int = N_BINS) -> tuple[ModeLabel, ...]:
    modes = []
    for line in lines:
        modes.extend(line_modes(line, bins))
    return canonical_registry(modes)


def canonical_registry(modes: Iterable[ModeLabel]) -> tuple[ModeLabel, ...]:
    modes = tuple(modes)
    if len(set(modes)) != len(modes):
        raise RegistryError("duplicate mode in registry")
    return tuple(sorted(modes))


class Ket:
    """Immutable sparse pure state.

    Parameters
    ----------
    modes : sequence of ModeLabel
        Mode registry.  Reordered into canonical order if necessary, with the
        occupation tuples permuted to match.
    terms : mapping
        Occupation tuple -> amplitude.
    norm_tracked : float
        Accumulated success probability of earlier projective steps.
    prune : float
        Amplitudes with magnitude below this are dropped.
    """

    __slots__ = ("_modes", "_terms", "_index", "_norm_tracked")

    def __init__(self, modes: Sequence[ModeLabel], terms: Mapping[tuple, complex],
                 norm_tracked: float = 1.0, prune: float = EPS_AMP):
        modes = tuple(modes)
        canon = canonical_registry(modes)
        if canon != modes:
            perm = [modes.index(m) for m in canon]
            terms = {tuple(occ[i] for i in perm): a for occ, a in terms.items()}
            modes = canon
        clean = {}
        n = len(modes)
        for occ, amp in terms.items():
            occ = tuple(int(x) for x in occ)
            if len(occ) != n:
                raise RegistryError(f"occupation length {len(occ)} != registry size {n}")
            if any(x < 0 for x in occ):
                raise ValueError("negative occupation")
            amp = complex(amp)
            if abs(amp) > prune or (prune == 0 and amp != 0):
                clean[occ] = amp
        if not 0.0 <= norm_tracked <= 1.0 + 1e-12:
            raise ValueError("norm_tracked outside [0, 1]")
        self._modes = modes
        self._terms = clean
        self._index = {m: i for i, m in enumerate(modes)}
        self._norm_tracked = min(float(norm_tracked), 1.0)

    # -- constructors -----------------------------------------------------

    @classmethod
    def vacuum(cls, modes: Sequence[ModeLabel]) -> "Ket":
        modes = canonical_registry(modes)
        return cls(modes, {(0,) * len(modes): 1.0})

    @classmethod
    def basis(cls, modes: Sequence[ModeLabel], occupation: Mapping[ModeLabel, int],
              amplitude: complex = 1.0) -> "Ket":
        modes = canonical_registry(modes)
        index = {m: i for i, m in enumerate(modes)}
        occ = [0] * len(modes)
        for m, k in occupation.items():
            if m not in index:
                raise RegistryError(f"unknown mode {m}")
            occ[index[m]] = k
        return cls(modes, {tuple(occ): amplitude})

    @classmethod
    def from_creation_polynomial(cls, modes: Sequence[ModeLabel],
                                 poly: Mapping[tuple, complex]) -> "Ket":
        """State P(a^dagger)|vac> for a polynomial given as exponent tuple -> coefficient."""
        terms = {occ: c * math.sqrt(_factorial_product(occ)) for occ, c in poly.items()}
        return cls(modes, terms)

    # -- accessors ----------------------------------------------------------

    @property
    def modes(self) -> tuple[ModeLabel, ...]:
        return self._modes

    @property
    def terms(self) -> Mapping[tuple, complex]:
        return MappingProxyType(self._terms)

    @property
    def norm_tracked(self) -> float:
        return self._norm_tracked

    def index(self, mode: ModeLabel) -> int:
        try:
            return self._index[mode]
        except KeyError:
            raise RegistryError(f"mode {mode} not in registry") from None

    def has_mode(self, mode: ModeLabel) -> bool:
        return mode in self._index

    def line_indices(self, line: str) -> list[int]:
        idx = [i for i, m in enumerate(self._modes) if m.spatial == line]
        if not idx:
            raise RegistryError(f"line {line!r} not in registry")
        return idx

    @property
    def lines(self) -> tuple[str, ...]:
        return tuple(sorted({m.spatial for m in self._modes}))

    @property
    def bins(self) -> int:
        return 1 + max((m.temporal_bin for m in self._modes), default=0)

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms.items())

    def amplitude(self, occupation: tuple) -> complex:
        return self._terms.get(tuple(occupation), 0j)

    def norm_squared(self) -> float:
        return float(sum(abs(a) ** 2 for a in self._terms.values()))

    def photon_numbers(self) -> set[int]:
        return {sum(occ) for occ in self._terms}

    def occupied_lines(self) -> set[str]:
        used = set()
        for occ in self._terms:
            for i, n in enumerate(occ):
                if n:
                    used.add(self._modes[i].spatial)
        return used

    # -- arithmetic ---------------------------------------------------------

    def _same_registry(self, other: "Ket"):
        if self._modes != other._modes:
            raise RegistryError("registry mismatch")

    def __add__(self, other: "Ket") -> "Ket":
        self._same_registry(other)
        out = dict(self._terms)
        for occ, a in other._terms.items():
            out[occ] = out.get(occ, 0j) + a
        return Ket(self._modes, out)

    def __sub__(self, other: "Ket") -> "Ket":
        return self + other * -1

    def __mul__(self, scalar: complex) -> "Ket":
        return Ket(self._modes, {o: a * scalar for o, a in self._terms.items()},
                   self._norm_tracked)

    __rmul__ = __mul__

    def __truediv__(self, scalar: complex) -> "Ket":
        return self * (1.0 / scalar)

    def __repr__(self):
        return f"Ket({len(self._modes)} modes, {len(self._terms)} terms)"

    def normalize(self) -> "Ket":
        n2 = self.norm_squared()
        if n2 == 0:
            raise ZeroDivisionError("cannot normalize the zero vector")
        return Ket(self._modes, {o: a / math.sqrt(n2) for o, a in self._terms.items()},
                   self._norm_tracked)

    def with_norm_tracked(self, value: float) -> "Ket":
        return Ket(self._modes, self._terms, value)

    def filter(self, keep: Callable[[tuple], bool]) -> "Ket":
        """Unnormalized restriction to the terms whose occupation satisfies ``keep``."""
        return Ket(self._modes, {o: a for o, a in self._terms.items() if keep(o)},
                   self._norm_tracked)

    def truncate(self, n_max: int = N_MAX) -> "Ket":
        return self.filter(lambda occ: sum(occ) <= n_max)

    def extend(self, modes: Iterable[ModeLabel]) -> "Ket":
        """Add vacuum modes to the registry."""
        new = [m for m in modes if m not in self._index]
        if not new:
            return self
        return tensor(self, Ket.vacuum(new))

    def dump(self) -> str:
        """Canonical text dump, one ``occupations re im`` line per term."""
        rows = []
        for occ in sorted(self._terms):
            a = self._terms[occ]
            rows.append(f"{','.join(map(str, occ))} {a.real:.12g} {a.imag:.12g}")
        return "\n".join(rows)


def _factorial_product(occ: Iterable[int]) -> int:
    out = 1
    for n in occ:
        out *= math.factorial(n)
    return out


def tensor(a: Ket, b: Ket, n_max: int | None = None) -> Ket:
    """Product state on the union of two disjoint registries.

    Terms above ``n_max`` total photons are dropped (no renormalization).
    """
    if set(a.modes) & set(b.modes):
        raise RegistryError("tensor requires disjoint registries")
    modes = a.modes + b.modes
    terms = {}
    for oa, aa in a:
        na = sum(oa)
        for ob, ab in b:
            if n_max is not None and na + sum(ob) > n_max:
                continue
            terms[oa + ob] = aa * ab
    return Ket(modes, terms, a.norm_tracked * b.norm_tracked)


def tensor_all(kets: Iterable[Ket], n_max: int | None = None) -> Ket:
    kets = list(kets)
    out = kets[0]
    for k in kets[1:]:
        out = tensor(out, k, n_max=n_max)
    return out


def check_unitary(U: np.ndarray, tol: float = UNITARY_TOL) -> np.ndarray:
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise ValueError("unitary must be a square matrix")
    err = np.max(np.abs(U @ U.conj().T - np.eye(U.shape[0])))
    if err > tol:
        raise ValueError(f"matrix is not unitary (deviation {err:.3g})")
    return U


def _expand(sub: tuple[int, ...], U: np.ndarray) -> list[tuple[tuple[int, ...], complex]]:
    """Output sub-occupations and amplitudes for one input sub-occupation."""
    k = len(sub)
    columns = []
    for i in range(k):
        col = [(j, U[j, i]) for j in range(k) if U[j, i] != 0]
        columns.append(col)
    poly = {(0,) * k: 1.0 + 0j}
    for i, n in enumerate(sub):
        for _ in range(n):
            nxt = defaultdict(complex)
            for expo, c in poly.items():
                for j, u in columns[i]:
                    e = list(expo)
                    e[j] += 1
                    nxt[tuple(e)] += c * u
            poly = nxt
    norm_in = math.sqrt(_factorial_product(sub))
    return [(expo, c * math.sqrt(_factorial_product(expo)) / norm_in)
            for expo, c in poly.items() if c != 0]


def apply_mode_unitary(psi: Ket, U: np.ndarray, modes: Sequence[ModeLabel],
                       prune: float = EPS_AMP, check: bool = True) -> Ket:
    """Apply a passive linear-optical unitary acting on ``modes``.

    Creation operators transform as ``a_i^dagger -> sum_j U[j, i] a_j^dagger``.
    """
    if check:
        U = check_unitary(U)
    else:
        U = np.asarray(U, dtype=complex)
    modes = list(modes)
    if len(set(modes)) != len(modes):
        raise RegistryError("repeated mode in unitary support")
    if U.shape[0] != len(modes):
        raise ValueError("unitary size does not match mode count")
    idx = [psi.index(m) for m in modes]
    cache: dict[tuple, list] = {}
    out: dict[tuple, complex] = defaultdict(complex)
    for occ, amp in psi:
        sub = tuple(occ[i] for i in idx)
        if not any(sub):
            out[occ] += amp
            continue
        expansion = cache.get(sub)
        if expansion is None:
            expansion = cache[sub] = _expand(sub, U)
        base = list(occ)
        for new_sub, c in expansion:
            for i, n in zip(idx, new_sub):
                base[i] = n
            out[tuple(base)] += amp * c
    return Ket(psi.modes, out, psi.norm_tracked, prune=prune)


def project(psi: Ket, keep: Callable[[tuple], bool]):
    """Project onto the span of basis states whose occupation satisfies ``keep``.

    Returns ``(ket, probability)``; the ket is renormalized and its
    ``norm_tracked`` multiplied by the probability.  A zero-probability
    outcome returns ``(None, 0.0)``.
    """
    n_in = psi.norm_squared()
    if n_in == 0:
        return None, 0.0
    kept = {o: a for o, a in psi if keep(o)}
    p = sum(abs(a) ** 2 for a in kept.values()) / n_in
    if p <= 0:
        return None, 0.0
    scale = 1.0 / math.sqrt(p * n_in)
    return Ket(psi.modes, {o: a * scale for o, a in kept.items()},
               psi.norm_tracked * p), float(p)


def mode_predicate(psi: Ket, mode: ModeLabel, count: int) -> Callable[[tuple], bool]:
    """Predicate selecting terms with exactly ``count`` photons in ``mode``."""
    i = psi.index(mode)
    return lambda occ: occ[i] == count


def inner_product(a: Ket, b: Ket) -> complex:
    a._same_registry(b)
    small, large = (a, b) if len(a) <= len(b) else (b, a)
    total = 0j
    for occ, amp in small:
        other = large.amplitude(occ)
        if other:
            total += amp.conjugate() * other if small is a else other.conjugate() * amp
    return total


def fidelity(a: Ket, b: Ket) -> float:
    """Pure-state fidelity of the normalized kets."""
    ip = inner_product(a, b)
    return float(abs(ip) ** 2 / (a.norm_squared() * b.norm_squared()))


# -- qubits and Bell states ------------------------------------------------

@dataclass(frozen=True)
class QubitState:
    """Polarization qubit alpha|H> + beta|V>."""

    alpha: complex
    beta: complex

    def __post_init__(self):
        n = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(n - 1) > 1e-12:
            raise ValueError(f"qubit state not normalized (|a|^2+|b|^2 = {n})")

    @classmethod
    def from_vector(cls, vec) -> "QubitState":
        vec = np.asarray(vec, dtype=complex)
        vec = vec / np.linalg.norm(vec)
        return cls(complex(vec[0]), complex(vec[1]))

    @classmethod
    def linear(cls, theta_deg: float) -> "QubitState":
        t = math.radians(theta_deg)
        return cls(math.cos(t), math.sin(t))

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.alpha, self.beta], dtype=complex)

    def orthogonal(self) -> "QubitState":
        return QubitState(-self.beta.conjugate(), self.alpha.conjugate())

    def overlap(self, other: "QubitState") -> float:
        return float(abs(np.vdot(self.vector, other.vector)) ** 2)


_S2 = 1 / math.sqrt(2)

H = QubitState(1, 0)
V = QubitState(0, 1)
PLUS = QubitState(_S2, _S2)
MINUS = QubitState(_S2, -_S2)
LEFT = QubitState(_S2, -1j * _S2)
RIGHT = QubitState(_S2, 1j * _S2)

OUTCOME_STATES = {"H": H, "V": V, "P": PLUS, "M": MINUS, "L": LEFT, "R": RIGHT}


def single_photon_ket(modes: Sequence[ModeLabel], line: str, state: QubitState,
                      temporal_bin: int = 0) -> Ket:
    ket = Ket.basis(modes, {ModeLabel(line, "H", temporal_bin): 1}, state.alpha)
    return ket + Ket.basis(modes, {ModeLabel(line, "V", temporal_bin): 1}, state.beta)


class Bell(Enum):
    PHI_PLUS = "phi+"
    PHI_MINUS = "phi-"
    PSI_PLUS = "psi+"
    PSI_MINUS = "psi-"

    @classmethod
    def parse(cls, name) -> "Bell":
        if isinstance(name, Bell):
            return name
        key = str(name).lower().replace("Φ", "phi").replace("Ψ", "psi")
        key = key.replace("−", "-")
        aliases = {"phip": "phi+", "phim": "phi-", "psip": "psi+", "psim": "psi-"}
        key = aliases.get(key, key)
        return cls(key)

    def coefficients(self) -> dict[tuple[str, str], float]:
        """Two-photon polarization amplitudes (pol_i, pol_j) -> coefficient."""
        sign = -1.0 if self.value.endswith("-") else 1.0
        if self.value.startswith("phi"):
            return {("H", "H"): _S2, ("V", "V"): sign * _S2}
        return {("H", "V"): _S2, ("V", "H"): sign * _S2}

    def vector(self) -> np.ndarray:
        """Amplitudes in the (HH, HV, VH, VV) product basis."""
        order = [("H", "H"), ("H", "V"), ("V", "H"), ("V", "V")]
        c = self.coefficients()
        return np.array([c.get(k, 0.0) for k in order], dtype=complex)


def make_bell(kind, i: str, j: str, bins: int = N_BINS,
              modes: Sequence[ModeLabel] | None = None) -> Ket:
    """Bell state of one photon in line ``i`` and one in line ``j`` (bin 0)."""
    kind = Bell.parse(kind)
    i, j = str(i), str(j)
    if i == j:
        raise ValueError("Bell state needs two distinct lines")
    if modes is None:
        modes = registry_for([i, j], bins)
    modes = canonical_registry(modes)
    out = None
    for (pi, pj), c in kind.coefficients().items():
        k = Ket.basis(modes, {ModeLabel(i, pi, 0): 1, ModeLabel(j, pj, 0): 1}, c)
        out = k if out is None else out + k
    return out
