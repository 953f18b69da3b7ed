"""Independent reference calculations used to freeze expected values.

Nothing here goes through the sparse substitution engine: amplitudes come
from matrix permanents over a dense mode list, and the CNOT circuit is wired
by hand from its beamsplitter transmissions.
"""

import itertools
import math

import numpy as np

S2 = 1 / math.sqrt(2)


def permanent(M):
    M = np.asarray(M, dtype=complex)
    n = M.shape[0]
    if n == 0:
        return 1.0 + 0j
    total = 0j
    for perm in itertools.permutations(range(n)):
        prod = 1.0 + 0j
        for i, j in enumerate(perm):
            prod *= M[i, j]
        total += prod
    return total


def transition_amplitude(U, n_in, n_out):
    """<n_out| U |n_in> for creation operators a_i^dag -> sum_j U[j, i] a_j^dag."""
    if sum(n_in) != sum(n_out):
        return 0j
    cols = [i for i, k in enumerate(n_in) for _ in range(k)]
    rows = [j for j, k in enumerate(n_out) for _ in range(k)]
    sub = np.asarray(U)[np.ix_(rows, cols)]
    norm = math.prod(math.factorial(k) for k in n_in) * math.prod(math.factorial(k) for k in n_out)
    return permanent(sub) / math.sqrt(norm)


def occupations(n_photons, n_modes):
    for combo in itertools.combinations_with_replacement(range(n_modes), n_photons):
        occ = [0] * n_modes
        for m in combo:
            occ[m] += 1
        yield tuple(occ)


def evolve(U, state):
    """Dense evolution of ``{occupation: amplitude}`` under ``U``."""
    out = {}
    n_modes = np.asarray(U).shape[0]
    for n_in, a in state.items():
        for n_out in occupations(sum(n_in), n_modes):
            amp = transition_amplitude(U, n_in, n_out)
            if abs(amp) > 1e-15:
                out[n_out] = out.get(n_out, 0) + a * amp
    return {k: v for k, v in out.items() if abs(v) > 1e-15}


def haar_unitary(n, rng):
    z = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


# -- hand-wired CNOT -----------------------------------------------------------
# modes 0..7 = 2H 2V 3H 3V 4H 4V 5H 5V at the input,
#              2pH 2pV 3pH 3pV 4pH 4pV 5pH 5pV at the output.

def cnot_unitary():
    U = np.zeros((8, 8), dtype=complex)
    # PBS on (2, 3): H transmits, V reflects
    U[0, 0] = 1  # 2H -> 2pH
    U[3, 1] = 1  # 2V -> 3pV
    U[2, 2] = 1  # 3H -> 3pH
    U[1, 3] = 1  # 3V -> 2pV
    # +/- PBS on (4, 5): |+> transmits (4 -> 4p), |-> reflects (4 -> 5p)
    p = np.array([S2, S2])
    m = np.array([S2, -S2])
    for src, through, across in ((4, 4, 6), (6, 6, 4)):
        for k, pol in enumerate((p, m)):
            vec = np.outer(p, p) if k == 0 else np.outer(m, m)
            dst = through if k == 0 else across
            # projector onto pol, carried to the destination line
            U[dst:dst + 2, src:src + 2] += vec
    return U


def analyzer(U, line_offset, state):
    """Compose ``U`` with a rotation that maps ``state`` on one output line to H."""
    a, b = state
    W = np.array([[np.conj(a), np.conj(b)], [-b, a]], dtype=complex)
    R = np.eye(U.shape[0], dtype=complex)
    R[line_offset:line_offset + 2, line_offset:line_offset + 2] = W
    return R @ U


def cnot_oracle(control, target):
    """Herald-conditioned (2p, 5p) amplitudes and herald probability.

    Input: control on 2, target on 5, ancilla (HV - VH)/sqrt2 on (3, 4).
    Herald: 3p in |->, 4p in |H>, given one photon in each of 2p, 3p, 4p, 5p.
    Returns ``(2x2 amplitude matrix over (2p, 5p) in H/V, herald probability)``.
    """
    U = analyzer(cnot_unitary(), 2, (S2, -S2))
    state = {}
    for (c_pol, c_amp), (t_pol, t_amp) in itertools.product(enumerate(control), enumerate(target)):
        for (p3, p4), sign in (((0, 1), S2), ((1, 0), -S2)):
            occ = [0] * 8
            occ[0 + c_pol] += 1
            occ[2 + p3] += 1
            occ[4 + p4] += 1
            occ[6 + t_pol] += 1
            occ = tuple(occ)
            state[occ] = state.get(occ, 0) + c_amp * t_amp * sign
    out = evolve(U, state)
    coinc = 0.0
    heralded = np.zeros((2, 2), dtype=complex)
    for occ, a in out.items():
        lines = [occ[0] + occ[1], occ[2] + occ[3], occ[4] + occ[5], occ[6] + occ[7]]
        if lines != [1, 1, 1, 1]:
            continue
        coinc += abs(a) ** 2
        if occ[2] == 1 and occ[4] == 1:
            heralded[occ[1], occ[7]] += a
    p_herald = float(np.sum(np.abs(heralded) ** 2))
    return heralded / math.sqrt(p_herald), p_herald / coinc


def hom_coincidence(overlap):
    """Two H photons on a 50:50 beamsplitter with mode overlap ``overlap``."""
    return 0.5 * (1 - overlap ** 2)


def teleport_oracle(alpha, beta):
    """Photon-1 states for the four (2p analyzer, 5p analyzer) outcomes.

    Pair (1, 2) in (HV - VH)/sqrt2, input on 5, ancilla on (3, 4), same herald.
    Works with modes 1H 1V + the eight gate modes; photon 1 is a spectator.
    Returns ``{(x, y): (probability, 2-vector of photon 1)}`` with x in P/M on
    2p and y in H/V on 5p.
    """
    results = {}
    U_gate = analyzer(cnot_unitary(), 2, (S2, -S2))
    for x, xs in (("P", (S2, S2)), ("M", (S2, -S2))):
        U = analyzer(U_gate, 0, xs)
        full = np.eye(10, dtype=complex)
        full[2:, 2:] = U
        state = {}
        for (p1, p2), s12 in (((0, 1), S2), ((1, 0), -S2)):
            for (p3, p4), s34 in (((0, 1), S2), ((1, 0), -S2)):
                for p5, a5 in ((0, alpha), (1, beta)):
                    occ = [0] * 10
                    occ[p1] += 1
                    occ[2 + p2] += 1
                    occ[4 + p3] += 1
                    occ[6 + p4] += 1
                    occ[8 + p5] += 1
                    occ = tuple(occ)
                    state[occ] = state.get(occ, 0) + s12 * s34 * a5
        out = evolve(full, state)
        for y, ypol in (("H", 0), ("V", 1)):
            vec = np.zeros(2, dtype=complex)
            for occ, a in out.items():
                if (occ[2], occ[3], occ[4], occ[5], occ[6], occ[7]) != (1, 0, 1, 0, 1, 0):
                    continue
                if occ[8 + ypol] != 1 or occ[9 - ypol] != 0:
                    continue
                vec[0 if occ[0] else 1] += a
            results[(x, y)] = vec
    total = sum(float(np.vdot(v, v).real) for v in results.values())
    return {k: (float(np.vdot(v, v).real) / total,
                v / np.linalg.norm(v) if np.linalg.norm(v) > 0 else v)
            for k, v in results.items()}


def cnot_row_with_overlap(control, target, lam23, lam45):
    """Truth-table row with partially distinguishable photons.

    Every mode gets two temporal bins; photons on lines 3 and 5 are rotated
    into bin 1 by ``sqrt(1 - lam^2)`` before the gate.  Probabilities are
    summed over bins (detectors do not resolve them).  Returns
    ``({"HH": p, ...} conditional on the herald, herald probability)``.
    """
    U8 = analyzer(cnot_unitary(), 2, (S2, -S2))
    mis = np.eye(16, dtype=complex)
    for line, lam in ((1, lam23), (3, lam45)):
        s = math.sqrt(1 - lam * lam)
        for pol in (0, 1):
            i0 = (line * 2 + pol) * 2
            mis[i0:i0 + 2, i0:i0 + 2] = [[lam, -s], [s, lam]]
    U = np.kron(U8, np.eye(2)) @ mis

    def idx(line, pol):
        return (line * 2 + pol) * 2

    state = {}
    for (c_pol, c_amp), (t_pol, t_amp) in itertools.product(enumerate(control), enumerate(target)):
        for (p3, p4), sign in (((0, 1), S2), ((1, 0), -S2)):
            occ = [0] * 16
            for line, pol in ((0, c_pol), (1, p3), (2, p4), (3, t_pol)):
                occ[idx(line, pol)] += 1
            occ = tuple(occ)
            state[occ] = state.get(occ, 0) + c_amp * t_amp * sign
    out = evolve(U, state)

    def count(occ, line, pol=None):
        pols = (0, 1) if pol is None else (pol,)
        return sum(occ[idx(line, p) + b] for p in pols for b in (0, 1))

    coinc, row = 0.0, {k: 0.0 for k in ("HH", "HV", "VH", "VV")}
    for occ, a in out.items():
        if any(count(occ, l) != 1 for l in range(4)):
            continue
        w = abs(a) ** 2
        coinc += w
        if count(occ, 1, 0) == 1 and count(occ, 2, 0) == 1:
            key = ("H" if count(occ, 0, 0) else "V") + ("H" if count(occ, 3, 0) else "V")
            row[key] += w
    total = sum(row.values())
    return {k: v / total for k, v in row.items()}, total / coinc
