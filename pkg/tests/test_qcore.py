"""State-machinery tests: every quantum rule checked against a brute-force oracle.

The oracle side of each test builds plain numpy vectors with kron products and
projectors, never touching the register implementation under test.
"""

import numpy as np
import pytest
from scipy.stats import chisquare

from eprlink.qcore import (
    Basis,
    BellOutcome,
    DeadQubitError,
    EntangledDiscardError,
    NonUnitaryError,
    PauliCode,
    QuantumRegister,
    attempt_clone_unitary,
    bell_vector,
    cnot_matrix,
    ghz_vector,
    is_bell_product,
    state_vector_for_label,
)

RT2 = 1.0 / np.sqrt(2.0)

H = np.array([[1, 1], [1, -1]], dtype=complex) * RT2
PAULI = {
    "I": np.eye(2, dtype=complex),
    "Z": np.diag([1.0, -1.0]).astype(complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "iY": np.array([[0, 1], [-1, 0]], dtype=complex),
}


def _kron(*mats):
    out = np.array([[1.0 + 0j]])
    for m in mats:
        out = np.kron(out, m)
    return out


def _embed(gate, slot, n):
    """gate on one qubit of an n-qubit chain, identity elsewhere."""
    mats = [np.eye(2, dtype=complex)] * n
    mats[slot] = gate
    return _kron(*mats)


# --- single states and gates -------------------------------------------------------


@pytest.mark.parametrize(
    "label,expected",
    [
        ("0", [1, 0]),
        ("1", [0, 1]),
        ("+", [RT2, RT2]),
        ("-", [RT2, -RT2]),
    ],
)
def test_state_labels(label, expected):
    assert np.allclose(state_vector_for_label(label), expected)


def test_bell_vectors_orthonormal():
    mat = np.stack([bell_vector(o) for o in BellOutcome])
    assert np.allclose(mat @ mat.conj().T, np.eye(4), atol=1e-12)


@pytest.mark.parametrize("outcome", list(BellOutcome))
def test_bell_vector_explicit(outcome):
    expected = {
        BellOutcome.PHI_PLUS: [RT2, 0, 0, RT2],
        BellOutcome.PHI_MINUS: [RT2, 0, 0, -RT2],
        BellOutcome.PSI_PLUS: [0, RT2, RT2, 0],
        BellOutcome.PSI_MINUS: [0, RT2, -RT2, 0],
    }[outcome]
    assert np.allclose(bell_vector(outcome), expected, atol=1e-12)


def test_ghz_vector_amplitudes():
    for k in (2, 3, 4):
        v = ghz_vector(k)
        expected = np.zeros(2**k, dtype=complex)
        expected[0] = expected[-1] = RT2
        assert np.allclose(v, expected, atol=1e-12)


# --- encode / decode bijection -------------------------------------------------------


@pytest.mark.parametrize("code", list(PauliCode))
def test_code_maps_pair_to_expected_bell_state(code):
    """Applying each two-bit code to half a pair lands exactly on one Bell state."""
    pair = bell_vector(BellOutcome.PHI_PLUS)
    encoded = _kron(code.matrix, np.eye(2)) @ pair
    target = BellOutcome.from_pauli(code)
    overlap = abs(np.vdot(bell_vector(target), encoded)) ** 2
    assert overlap == pytest.approx(1.0, abs=1e-12)


def test_code_bit_assignment_is_a_bijection():
    seen = set()
    for code in PauliCode:
        bits = code.bits
        assert PauliCode.from_bits(*bits) is code
        seen.add(bits)
    assert seen == {(0, 0), (0, 1), (1, 0), (1, 1)}
    # the first bit separates the swapped-occupation states from the aligned ones
    assert PauliCode.from_bits(0, 0) is PauliCode.I
    assert PauliCode.from_bits(0, 1) is PauliCode.Z
    assert PauliCode.from_bits(1, 0) is PauliCode.X
    assert PauliCode.from_bits(1, 1) is PauliCode.IY


@pytest.mark.parametrize("code", list(PauliCode))
def test_register_roundtrip_decodes_exactly(code):
    reg = QuantumRegister()
    rng = np.random.default_rng(5)
    qa, qb = reg.prepare_epr_pair()
    reg.apply_pauli(qa, code)
    outcome = reg.bell_measure(qa, qb, rng)
    assert outcome.bits == code.bits
    assert outcome is BellOutcome.from_pauli(code)


# --- measurement statistics -----------------------------------------------------------


def test_same_basis_outcomes_always_agree():
    """Shared pairs correlate perfectly in both discussion bases."""
    rng = np.random.default_rng(101)
    reg = QuantumRegister()
    counts = {(Basis.Z, 0): 0, (Basis.Z, 1): 0, (Basis.X, 0): 0, (Basis.X, 1): 0}
    for i in range(10_000):
        qa, qb = reg.prepare_epr_pair()
        basis = Basis.Z if i % 2 == 0 else Basis.X
        a = reg.measure(qa, basis, rng).bit
        b = reg.measure(qb, basis, rng).bit
        assert a == b
        counts[(basis, a)] += 1
        reg.discard(qa)
        reg.discard(qb)
    # outcomes themselves stay unbiased
    for basis in (Basis.Z, Basis.X):
        total = counts[(basis, 0)] + counts[(basis, 1)]
        assert abs(counts[(basis, 0)] / total - 0.5) < 3 * np.sqrt(0.25 / total)


def test_measurement_is_repeatable():
    rng = np.random.default_rng(17)
    reg = QuantumRegister()
    for _ in range(200):
        qa, qb = reg.prepare_epr_pair()
        first = reg.measure(qa, Basis.X, rng).bit
        again = reg.measure(qa, Basis.X, rng).bit
        assert first == again
        reg.discard(qa)
        reg.discard(qb)


def test_plus_state_z_measurement_is_unbiased():
    rng = np.random.default_rng(23)
    reg = QuantumRegister()
    bits = []
    for _ in range(4000):
        q = reg.prepare_single("+")
        bits.append(reg.measure(q, Basis.Z, rng).bit)
        reg.discard(q)
    ones = sum(bits)
    assert abs(ones / 4000 - 0.5) < 3 * np.sqrt(0.25 / 4000)


def test_no_signaling_choice_of_basis_does_not_bias_partner():
    """Bob's marginal is indistinguishable whether Alice measured Z or X."""
    rng = np.random.default_rng(31)
    reg = QuantumRegister()
    marginals = {Basis.Z: [0, 0], Basis.X: [0, 0]}
    for _ in range(4000):
        for alice_basis in (Basis.Z, Basis.X):
            qa, qb = reg.prepare_epr_pair()
            reg.measure(qa, alice_basis, rng)
            marginals[alice_basis][reg.measure(qb, Basis.Z, rng).bit] += 1
            reg.discard(qa)
            reg.discard(qb)
    observed = marginals[Basis.Z]
    # expected frequencies taken from the other arm of the experiment
    expected_rate = (marginals[Basis.X][0] + 1) / (sum(marginals[Basis.X]) + 2)
    total = sum(observed)
    _, p_value = chisquare(observed, [total * expected_rate, total * (1 - expected_rate)])
    assert p_value > 1e-4


# --- brute-force oracle comparisons -----------------------------------------------------


def test_reduced_density_matches_kron_oracle():
    rng = np.random.default_rng(3)
    reg = QuantumRegister()
    qa, qb = reg.prepare_epr_pair()
    qc = reg.prepare_single("+")
    reg.apply_cnot(qb, qc)  # genuinely tripartite now

    # oracle: same circuit on a flat 8-dim vector, order (a, b, c)
    vec = np.kron(bell_vector(BellOutcome.PHI_PLUS), state_vector_for_label("+"))
    cnot_bc = _kron(np.eye(2), cnot_matrix()).reshape(8, 8)
    vec = cnot_bc @ vec
    rho_abc = np.outer(vec, vec.conj()).reshape(2, 2, 2, 2, 2, 2)
    rho_ac = np.trace(rho_abc, axis1=1, axis2=4).reshape(4, 4)

    got = reg.reduced_density([qa, qc])
    assert np.allclose(got, rho_ac, atol=1e-12)


def test_ghz_diagonal_basis_parity_matches_kron_oracle():
    """All-diagonal measurement of a shared triple has even parity, each pattern 1/4."""
    # oracle: probabilities from projecting the 8-dim state
    v = ghz_vector(3)
    plus, minus = state_vector_for_label("+"), state_vector_for_label("-")
    probs = {}
    for bits in np.ndindex(2, 2, 2):
        basis_vecs = [minus if b else plus for b in bits]
        amp = np.vdot(_kron_vec(*basis_vecs), v)
        probs[bits] = abs(amp) ** 2
    for bits, p in probs.items():
        expected = 0.25 if sum(bits) % 2 == 0 else 0.0
        assert p == pytest.approx(expected, abs=1e-12)

    # register statistics agree
    rng = np.random.default_rng(7)
    reg = QuantumRegister()
    counts = {bits: 0 for bits in probs}
    trials = 6000
    for _ in range(trials):
        qs = reg.prepare_ghz(3)
        got = tuple(reg.measure(q, Basis.X, rng).bit for q in qs)
        counts[got] += 1
        for q in qs:
            reg.discard(q)
    for bits, p in probs.items():
        if p == 0.0:
            assert counts[bits] == 0
        else:
            assert abs(counts[bits] / trials - p) < 3 * np.sqrt(p * (1 - p) / trials)


def _kron_vec(*vecs):
    out = np.array([1.0 + 0j])
    for v in vecs:
        out = np.kron(out, v)
    return out


def test_ghz_bipartition_is_maximally_mixed():
    reg = QuantumRegister()
    qs = reg.prepare_ghz(3)
    rho_one = reg.reduced_density([qs[0]])
    assert np.allclose(rho_one, np.eye(2) / 2, atol=1e-12)
    purity = float(np.trace(rho_one @ rho_one).real)
    assert purity == pytest.approx(0.5, abs=1e-12)


def test_joint_pair_measurement_matches_sixteen_dim_oracle():
    """Projecting middles of two pairs: uniform outcomes, ends land on a Bell state."""
    # oracle on a flat 16-dim vector, order (a1, a2, b1, b2)
    vec = _kron_vec(bell_vector(BellOutcome.PHI_PLUS), bell_vector(BellOutcome.PHI_PLUS))
    oracle = {}
    for outcome in BellOutcome:
        proj = bell_vector(outcome)
        # amplitude tensor indexed (a1, a2, b1, b2) -> contract (a2, b1) with proj*
        arr = vec.reshape(2, 2, 2, 2)
        coeff = np.tensordot(proj.conj().reshape(2, 2), arr, axes=([0, 1], [1, 2]))
        p = float(np.vdot(coeff, coeff).real)
        ends = coeff.reshape(4)
        ends = ends / np.linalg.norm(ends)
        oracle[outcome] = (p, ends)
    for outcome, (p, _ends) in oracle.items():
        assert p == pytest.approx(0.25, abs=1e-12)

    rng = np.random.default_rng(11)
    reg = QuantumRegister()
    counts = {o: 0 for o in BellOutcome}
    trials = 8000
    for _ in range(trials):
        a1, a2 = reg.prepare_epr_pair()
        b1, b2 = reg.prepare_epr_pair()
        outcome = reg.bell_measure(a2, b1, rng)
        counts[outcome] += 1
        # the surviving ends must match the oracle's conditional state exactly
        _p, ends = oracle[outcome]
        rho = reg.reduced_density([a1, b2])
        assert np.allclose(rho, np.outer(ends, ends.conj()), atol=1e-10)
    _, p_value = chisquare(list(counts.values()))
    assert p_value > 1e-4


def test_x_basis_measurement_probability_matches_oracle():
    """Diagonal-basis hit rate on a random pure state matches the projector."""
    rng = np.random.default_rng(13)
    raw = rng.normal(size=2) + 1j * rng.normal(size=2)
    raw = raw / np.linalg.norm(raw)
    p_plus_oracle = abs(np.vdot(state_vector_for_label("+"), raw)) ** 2
    # rotate |0> onto the target state with a unitary completion
    u = np.column_stack([raw, np.array([-raw[1].conjugate(), raw[0].conjugate()])])

    hits = 0
    trials = 4000
    reg = QuantumRegister()
    for _ in range(trials):
        q = reg.prepare_single("0")
        anc = reg.prepare_single("0")
        reg.apply_two_qubit_unitary(np.kron(u, np.eye(2)), q, anc)
        hits += 1 - reg.measure(q, Basis.X, rng).bit
        reg.measure(anc, Basis.Z, rng)
        reg.discard(q)
        reg.discard(anc)
    band = 3 * np.sqrt(max(p_plus_oracle * (1 - p_plus_oracle), 1e-4) / trials)
    assert abs(hits / trials - p_plus_oracle) < band


# --- register bookkeeping -----------------------------------------------------------


def test_norm_preserved_under_random_circuits():
    rng = np.random.default_rng(19)
    reg = QuantumRegister()
    live = []
    for _ in range(40):
        if len(live) < 2 or rng.random() < 0.3:
            qa, qb = reg.prepare_epr_pair()
            live += [qa, qb]
        op = rng.integers(3)
        picks = rng.choice(len(live), size=2, replace=False)
        qa, qb = live[picks[0]], live[picks[1]]
        if op == 0:
            reg.apply_cnot(qa, qb)
        elif op == 1:
            reg.apply_hadamard(qa)
        else:
            reg.apply_pauli(qb, PauliCode.X)
        assert reg.max_norm_error() < 1e-10


def test_dead_qubit_rejected():
    rng = np.random.default_rng(29)
    reg = QuantumRegister()
    q = reg.prepare_single("0")
    reg.measure(q, Basis.Z, rng)
    reg.discard(q)
    with pytest.raises(DeadQubitError):
        reg.measure(q, Basis.Z, rng)
    with pytest.raises(DeadQubitError):
        reg.apply_hadamard(q)


def test_entangled_discard_rejected():
    reg = QuantumRegister()
    qa, qb = reg.prepare_epr_pair()
    with pytest.raises(EntangledDiscardError):
        reg.discard(qa)
    # after disentangling, discard is fine
    rng = np.random.default_rng(31)
    reg.measure(qa, Basis.Z, rng)
    reg.discard(qa)
    reg.discard(qb)
    assert not reg.is_live(qa) and not reg.is_live(qb)


def test_non_unitary_rejected():
    reg = QuantumRegister()
    qa, qb = reg.prepare_epr_pair()
    bad = np.eye(4, dtype=complex)
    bad[0, 0] = 2.0
    with pytest.raises(NonUnitaryError):
        reg.apply_two_qubit_unitary(bad, qa, qb)


def test_seeded_runs_reproduce_exactly():
    def run(seed):
        rng = np.random.default_rng(seed)
        reg = QuantumRegister()
        bits = []
        for _ in range(60):
            qa, qb = reg.prepare_epr_pair()
            reg.apply_hadamard(qa)
            bits.append(reg.measure(qa, Basis.Z, rng).bit)
            bits.append(reg.measure(qb, Basis.X, rng).bit)
        return bits

    assert run(97) == run(97)
    assert run(97) != run(98)  # astronomically unlikely to collide


# --- pair certification ----------------------------------------------------------------


def test_is_bell_product_accepts_fresh_pairs():
    reg = QuantumRegister()
    for _ in range(100):
        qa, qb = reg.prepare_epr_pair()
        check = is_bell_product(reg, qa, qb)
        assert check.passed
        assert check.fidelity >= 1 - 1e-10
        assert check.purity >= 1 - 1e-9


def test_is_bell_product_rejects_wrong_states():
    reg = QuantumRegister()
    # wrong Bell state: right purity, wrong target
    qa, qb = reg.prepare_epr_pair()
    reg.apply_pauli(qa, PauliCode.Z)
    check = is_bell_product(reg, qa, qb)
    assert not check.passed and check.fidelity < 0.5

    # entangled with a third system: fails purity
    qs = reg.prepare_ghz(3)
    check = is_bell_product(reg, qs[0], qs[1])
    assert not check.passed and check.purity < 0.75

    # product of singles: pure but not entangled
    q0 = reg.prepare_single("0")
    q1 = reg.prepare_single("+")
    check = is_bell_product(reg, q0, q1)
    assert not check.passed


# --- cloning ----------------------------------------------------------------------------


def test_copier_fidelities_for_known_unitaries():
    fids = attempt_clone_unitary(cnot_matrix(), ("0", "1", "+", "-"))
    assert fids["0"] == pytest.approx(1.0, abs=1e-12)
    assert fids["1"] == pytest.approx(1.0, abs=1e-12)
    assert fids["+"] == pytest.approx(0.5, abs=1e-12)
    assert fids["-"] == pytest.approx(0.0, abs=1e-12)

    fids_id = attempt_clone_unitary(np.eye(4, dtype=complex), ("0", "1", "+", "-"))
    assert fids_id["0"] == pytest.approx(1.0, abs=1e-12)  # |0>|0> already "cloned"
    assert fids_id["+"] == pytest.approx(0.5, abs=1e-12)


def test_no_unitary_clones_all_four_states():
    """Randomized search never finds a universal copier for the decoy set."""
    rng = np.random.default_rng(41)
    labels = ("0", "1", "+", "-")
    best = 0.0
    for _ in range(500):
        z = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        q, r = np.linalg.qr(z)
        u = q * (np.diagonal(r) / np.abs(np.diagonal(r)))
        fids = attempt_clone_unitary(u, labels)
        best = max(best, min(fids.values()))
    assert best < 1 - 1e-6
