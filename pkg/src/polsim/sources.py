"""Initial-state factories: SPDC pairs, weak coherent pulses, single photons."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

from .fock import (N_BINS, Bell, Ket, ModeLabel, QubitState, registry_for,
                   single_photon_ket)

SOURCE_KINDS = ("spdc", "coherent", "single", "vacuum")


def _pair_creation(kind: Bell, i: str, j: str, modes) -> dict[tuple, complex]:
    """The pair creation operator S^dagger as a creation polynomial."""
    index = {m: n for n, m in enumerate(modes)}
    poly = {}
    for (pi, pj), c in kind.coefficients().items():
        expo = [0] * len(modes)
        expo[index[ModeLabel(i, pi, 0)]] += 1
        expo[index[ModeLabel(j, pj, 0)]] += 1
        poly[tuple(expo)] = c
    return poly


def _poly_mul(a: dict, b: dict) -> dict:
    out = defaultdict(complex)
    for ea, ca in a.items():
        for eb, cb in b.items():
            out[tuple(x + y for x, y in zip(ea, eb))] += ca * cb
    return dict(out)


def spdc_pair(i: str, j: str, p: float, order: int = 2, bell="psi-",
              bins: int = N_BINS) -> Ket:
    """Truncated two-mode squeezed state ``|vac> + sqrt(p) S|vac> + (p/2) S^2|vac>``.

    ``S`` creates one polarization-entangled pair in the requested Bell state.
    The second-order term uses the bosonic square of the pair operator, which
    is what the squeezing Hamiltonian produces.  The result is normalized.
    """
    if not 0.0 <= p <= 0.1:
        raise ValueError(f"pair probability must lie in [0, 0.1], got {p}")
    if order not in (1, 2):
        raise ValueError(f"emission order must be 1 or 2, got {order}")
    kind = Bell.parse(bell)
    modes = registry_for([str(i), str(j)], bins)
    s = _pair_creation(kind, str(i), str(j), modes)
    poly = {(0,) * len(modes): 1.0}
    poly.update({e: math.sqrt(p) * c for e, c in s.items()})
    if order == 2:
        for e, c in _poly_mul(s, s).items():
            poly[e] = poly.get(e, 0) + 0.5 * p * c
    return Ket.from_creation_polynomial(modes, poly).normalize()


def weak_coherent(line: str, state: QubitState, mu: float, n_max: int = 2,
                  bins: int = N_BINS) -> Ket:
    """Poissonian pulse in polarization ``state``, truncated at ``n_max`` photons."""
    if mu < 0:
        raise ValueError("mean photon number must be non-negative")
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"mean photon number must lie in [0, 1], got {mu}")
    line = str(line)
    modes = registry_for([line], bins)
    ih = modes.index(ModeLabel(line, "H", 0))
    iv = modes.index(ModeLabel(line, "V", 0))
    # (alpha a_H^dag + beta a_V^dag)^n / n!  gives amplitude c_n |n>_state
    poly = defaultdict(complex)
    for n in range(n_max + 1):
        c_n = math.exp(-mu / 2) * mu ** (n / 2) / math.sqrt(math.factorial(n))
        coef = c_n / math.sqrt(math.factorial(n))
        for k in range(n + 1):
            expo = [0] * len(modes)
            expo[ih], expo[iv] = k, n - k
            poly[tuple(expo)] += (coef * math.comb(n, k)
                                  * state.alpha ** k * state.beta ** (n - k))
    return Ket.from_creation_polynomial(modes, poly).normalize()


def single_photon(line: str, alpha: complex, beta: complex, bins: int = N_BINS) -> Ket:
    state = QubitState(alpha, beta)
    return single_photon_ket(registry_for([str(line)], bins), str(line), state)


def vacuum(lines, bins: int = N_BINS) -> Ket:
    if isinstance(lines, str):
        lines = [lines]
    return Ket.vacuum(registry_for([str(x) for x in lines], bins))


@dataclass(frozen=True)
class SourceSpec:
    kind: str
    lines: tuple[str, ...]
    p: float = 0.05
    mu: float = 0.05
    bell: str = "psi-"
    state: QubitState = QubitState(1, 0)
    order: int = 2
    n_max: int = 2

    def __post_init__(self):
        if self.kind not in SOURCE_KINDS:
            raise ValueError(f"unknown source kind {self.kind!r}")
        want = 2 if self.kind == "spdc" else 1
        if len(self.lines) != want:
            raise ValueError(f"{self.kind} source binds {want} line(s)")
        if not 0.0 <= self.p <= 0.1:
            raise ValueError("p must lie in [0, 0.1]")
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError("mu must lie in [0, 1]")
        if self.order not in (1, 2):
            raise ValueError("order must be 1 or 2")

    def build(self, bins: int = N_BINS) -> Ket:
        if self.kind == "spdc":
            return spdc_pair(*self.lines, self.p, self.order, self.bell, bins)
        if self.kind == "coherent":
            return weak_coherent(self.lines[0], self.state, self.mu, self.n_max, bins)
        if self.kind == "single":
            return single_photon(self.lines[0], self.state.alpha, self.state.beta, bins)
        return vacuum(self.lines, bins)
