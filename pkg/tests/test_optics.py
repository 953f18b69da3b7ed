import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polsim.fock import (LEFT, MINUS, PLUS, Bell, Ket, ModeLabel, QubitState,
                         fidelity, make_bell, registry_for, single_photon_ket,
                         tensor)
from polsim.optics import (ElementSpec, apply_mismatch, apply_two_line, hwp,
                           mismatch_matrix, pauli, pbs45_matrix, pbs_matrix,
                           polarizer, qwp, rotation_to_h, swap_lines)
from polsim.detection import fires

import oracles

S2 = 1 / math.sqrt(2)


def occ_of(modes, counts):
    return next(iter(Ket.basis(modes, counts).terms))


def photon(line, state, bins=2):
    return single_photon_ket(registry_for([line], bins), line, state)


def test_hwp_zero_and_hadamard():
    assert np.allclose(hwp(0) @ [1, 0], [1, 0])
    assert np.allclose(hwp(0) @ [0, 1], [0, -1])
    assert np.allclose(hwp(22.5) @ [1, 0], [S2, S2])
    assert np.allclose(hwp(22.5) @ [0, 1], [S2, -S2])


@given(theta=st.floats(-720, 720, allow_nan=False))
def test_hwp_is_involution(theta):
    assert np.allclose(hwp(theta) @ hwp(theta), np.eye(2), atol=1e-12)


def test_qwp_conventions():
    assert np.allclose(qwp(0) @ [1, 0], [1, 0])
    assert np.allclose(qwp(0) @ [0, 1], [0, 1j])
    out = qwp(45) @ [1, 0]
    assert abs(np.vdot(LEFT.vector, out)) ** 2 == pytest.approx(1.0)


def test_qwp_unitary_for_random_angles():
    rng = np.random.default_rng(3)
    for theta in rng.uniform(-180, 180, size=100):
        Q = qwp(theta)
        assert np.max(np.abs(Q @ Q.conj().T - np.eye(2))) < 1e-12


def test_pauli_actions():
    Z, X = pauli("Z"), pauli("X")
    assert np.allclose(Z @ [1, 0], [1, 0])
    assert np.allclose(Z @ [0, 1], [0, -1])
    a, b = 0.6, 0.8j
    assert np.allclose(X @ [a, b], [b, a])
    # Phi+ branch target alpha|V> - beta|H> back to alpha|H> + beta|V>
    fixed = X @ Z @ np.array([-b, a])
    assert abs(np.vdot([a, b], fixed)) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        pauli("W")


def test_pbs_matrix_is_the_stated_permutation():
    M = pbs_matrix()
    assert np.allclose(M @ M.T, np.eye(4))
    assert np.allclose(M @ [1, 0, 0, 0], [1, 0, 0, 0])   # a_H -> c_H
    assert np.allclose(M @ [0, 1, 0, 0], [0, 0, 0, 1])   # a_V -> d_V
    assert np.allclose(M @ [0, 0, 1, 0], [0, 0, 1, 0])   # b_H -> d_H
    assert np.allclose(M @ [0, 0, 0, 1], [0, 1, 0, 0])   # b_V -> c_V


def test_pbs45_is_conjugated_pbs():
    h = np.kron(np.eye(2), hwp(22.5))
    assert np.max(np.abs(pbs45_matrix() - h @ pbs_matrix() @ h)) < 1e-12
    P = pbs45_matrix()
    assert np.max(np.abs(P @ P.conj().T - np.eye(4))) < 1e-10


def two_photons(a_state, b_state, a="a", b="b"):
    return tensor(photon(a, a_state), photon(b, b_state))


def line_counts(ket, lines):
    """Probability of each photon-number split across ``lines``."""
    idx = {l: ket.line_indices(l) for l in lines}
    out = {}
    for occ, amp in ket:
        key = tuple(sum(occ[i] for i in idx[l]) for l in lines)
        out[key] = out.get(key, 0) + abs(amp) ** 2
    return {k: v for k, v in out.items() if v > 1e-12}


def test_pbs_transmits_h():
    el = ElementSpec("pbs", ("a", "b"), ("c", "d"))
    out, p = el.apply(two_photons(QubitState(1, 0), QubitState(1, 0)).extend(
        registry_for(["a", "b", "c", "d"])))
    assert p == 1.0
    assert line_counts(out, ["c", "d"]) == {(1, 1): pytest.approx(1.0)}


def test_pbs_parity_patterns():
    modes = registry_for(["a", "b", "c", "d"])
    el = ElementSpec("pbs", ("a", "b"), ("c", "d"))
    hv_same_line = Ket.basis(modes, {ModeLabel("a", "H"): 1, ModeLabel("a", "V"): 1})
    out, _ = el.apply(hv_same_line)
    assert line_counts(out, ["c", "d"]) == {(1, 1): pytest.approx(1.0)}
    vh = Ket.basis(modes, {ModeLabel("a", "V"): 1, ModeLabel("b", "H"): 1})
    out, _ = el.apply(vh)
    assert line_counts(out, ["c", "d"]) == {(0, 2): pytest.approx(1.0)}


def test_pbs45_patterns():
    modes = registry_for(["a", "b", "c", "d"])
    el = ElementSpec("pbs45", ("a", "b"), ("c", "d"))
    out, _ = el.apply(two_photons(PLUS, PLUS).extend(modes))
    target = two_photons(PLUS, PLUS, "c", "d").extend(modes)
    assert fidelity(out, target) == pytest.approx(1.0)
    # |+>_a |->_a: one photon each way
    idx_p = [ModeLabel("a", "H"), ModeLabel("a", "V")]
    poly = {}
    mi = {m: i for i, m in enumerate(modes)}
    for (x, cx) in ((0, S2), (1, S2)):
        for (y, cy) in ((0, S2), (1, -S2)):
            e = [0] * len(modes)
            e[mi[idx_p[x]]] += 1
            e[mi[idx_p[y]]] += 1
            poly[tuple(e)] = poly.get(tuple(e), 0) + cx * cy
    pm = Ket.from_creation_polynomial(modes, poly).normalize()
    out, _ = el.apply(pm)
    assert line_counts(out, ["c", "d"]) == {(1, 1): pytest.approx(1.0)}


def test_pbs_matches_permanent_oracle():
    rng = np.random.default_rng(11)
    modes = registry_for(["a", "b"], bins=1)
    M = pbs45_matrix()
    for _ in range(5):
        occ = tuple(int(x) for x in rng.integers(0, 2, size=4))
        if not any(occ):
            continue
        k = Ket(modes, {occ: 1.0})
        out = apply_two_line(k, "a", "b", M)
        for n_out in oracles.occupations(sum(occ), 4):
            assert out.amplitude(n_out) == pytest.approx(
                oracles.transition_amplitude(M, occ, n_out), abs=1e-12)


def test_polarizer_pass_probabilities():
    _, p = polarizer(photon("a", QubitState(1, 0)), "a", 0)
    assert p == pytest.approx(1.0)
    none, p = polarizer(photon("a", QubitState.linear(-45)), "a", 45)
    assert none is None and p == 0.0


@pytest.mark.parametrize("theta", [0, 20, 45, 90, 135, 170])
def test_polarizer_on_singlet_gives_sin_squared(theta):
    ket = make_bell(Bell.PSI_MINUS, "2p", "5p")
    ket, p5 = fires(ket, "5p", QubitState.linear(45))
    _, p = polarizer(ket, "2p", theta)
    assert p == pytest.approx(math.sin(math.radians(theta - 45)) ** 2, abs=1e-12)


def test_mismatch_identity_and_orthogonal():
    k = photon("a", PLUS)
    assert fidelity(apply_mismatch(k, "a", 1.0), k) == pytest.approx(1.0)
    assert fidelity(apply_mismatch(k, "a", 0.0), k) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        mismatch_matrix(1.5)


def hom_visibility(lam):
    modes = registry_for(["a", "b"])
    k = Ket.basis(modes, {ModeLabel("a", "H"): 1, ModeLabel("b", "H"): 1})
    k = apply_mismatch(k, "b", lam)
    bs = np.kron(np.array([[1, 1], [1, -1]]) / math.sqrt(2), np.eye(2))
    k = apply_two_line(k, "a", "b", bs)
    coinc = line_counts(k, ["a", "b"]).get((1, 1), 0.0)
    return 1 - coinc / oracles.hom_coincidence(0.0)


@pytest.mark.parametrize("lam", [0, 0.25, 0.5, 0.75, 1])
def test_hom_visibility_is_overlap_squared(lam):
    assert hom_visibility(lam) == pytest.approx(lam ** 2, abs=1e-9)


def test_swap_lines_moves_photon():
    modes = registry_for(["a", "b"])
    k = Ket.basis(modes, {ModeLabel("a", "V", 1): 1})
    out = swap_lines(k, "a", "b")
    assert out.amplitude(occ_of(modes, {ModeLabel("b", "V", 1): 1})) == 1


def test_rotation_to_h():
    for s in (PLUS, MINUS, LEFT, QubitState.linear(33)):
        W = rotation_to_h(s)
        assert np.allclose(W @ s.vector, [1, 0])
        assert abs((W @ s.orthogonal().vector)[0]) < 1e-12


def test_element_spec_validation():
    with pytest.raises(ValueError):
        ElementSpec("pbs", ("a",))
    with pytest.raises(ValueError):
        ElementSpec("hwp", ("a",))
    with pytest.raises(ValueError):
        ElementSpec("mismatch", ("a",), overlap=2.0)
    with pytest.raises(ValueError):
        ElementSpec("pauli", ("a",), pauli="Q")
    with pytest.raises(ValueError):
        ElementSpec("laser", ("a",))
    with pytest.raises(ValueError):
        ElementSpec("pbs", ("a", "a"))


@settings(max_examples=25, deadline=None)
@given(theta=st.floats(0, 180), kind=st.sampled_from(["hwp", "qwp"]))
def test_elements_act_identically_on_every_bin(theta, kind):
    el = ElementSpec(kind, ("a",), angle_deg=theta)
    modes = registry_for(["a"])
    k0 = Ket.basis(modes, {ModeLabel("a", "H", 0): 1})
    k1 = Ket.basis(modes, {ModeLabel("a", "H", 1): 1})
    o0, _ = el.apply(k0)
    o1, _ = el.apply(k1)
    for pol in "HV":
        a0 = o0.amplitude(occ_of(modes, {ModeLabel("a", pol, 0): 1}))
        a1 = o1.amplitude(occ_of(modes, {ModeLabel("a", pol, 1): 1}))
        assert a0 == pytest.approx(a1, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(theta=st.floats(0, 180), lam=st.floats(0, 1))
def test_elements_conserve_photon_number(theta, lam):
    k = tensor(make_bell("psi-", "a", "b"), photon("c", PLUS))
    for el in (ElementSpec("hwp", ("a",), angle_deg=theta),
               ElementSpec("mismatch", ("c",), overlap=lam),
               ElementSpec("pbs", ("a", "c")),
               ElementSpec("pbs45", ("b", "c"))):
        k, _ = el.apply(k)
        assert k.photon_numbers() == {3}
        assert k.norm_squared() == pytest.approx(1.0)
