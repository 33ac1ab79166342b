"""Pure-state qubit engine used by every protocol component.

The register keeps the global state factored into independent tensor factors,
one per group of qubits that have actually interacted.  Payload pairs, decoy
photons and adversary ancillas therefore live in registers of a few qubits
each, and memory stays bounded no matter how long the transmitted sequences
get.  Entangling operations merge factors on demand; discarding a qubit that
is back in a product state shrinks its factor again.

Conventions:
  * amplitudes of an n-qubit factor are stored as a complex ndarray of shape
    (2,) * n; the qubit at position k of ``qubit_order`` owns axis k,
  * measurement bits: 0 means |0> (Z) or |+> (X), 1 means |1> or |->,
  * all randomness is drawn from an explicitly passed ``numpy.random.Generator``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

NORM_ATOL = 1e-10
PURITY_ATOL = 1e-9
UNITARY_ATOL = 1e-10

_SQRT_HALF = 1.0 / math.sqrt(2.0)

SINGLE_STATE_LABELS = ("0", "1", "+", "-")

_SINGLE_STATES = {
    "0": np.array([1.0, 0.0], dtype=complex),
    "1": np.array([0.0, 1.0], dtype=complex),
    "+": np.array([_SQRT_HALF, _SQRT_HALF], dtype=complex),
    "-": np.array([_SQRT_HALF, -_SQRT_HALF], dtype=complex),
}

_ID2 = np.eye(2, dtype=complex)
_PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
_PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
# i * sigma_y maps |0> -> -|1> and |1> -> |0>; real entries keep encoding real.
_PAULI_IY = np.array([[0.0, 1.0], [-1.0, 0.0]], dtype=complex)
_HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) * _SQRT_HALF

_CNOT = np.array(
    [
        [1, 0, 0, 0],
        [0, 1, 0, 0],
        [0, 0, 0, 1],
        [0, 0, 1, 0],
    ],
    dtype=complex,
)


class Basis(Enum):
    """Measurement basis: computational (Z) or diagonal (X)."""

    Z = "Z"
    X = "X"


class PauliCode(Enum):
    """The four encoding operations and their two-bit codes."""

    I = "I"
    Z = "Z"
    X = "X"
    IY = "iY"

    @property
    def matrix(self) -> np.ndarray:
        return _PAULI_MATRICES[self]

    @property
    def bits(self) -> Tuple[int, int]:
        return _PAULI_TO_BITS[self]

    @classmethod
    def from_bits(cls, first: int, second: int) -> "PauliCode":
        return _BITS_TO_PAULI[(first & 1, second & 1)]


_PAULI_MATRICES = {
    PauliCode.I: _ID2,
    PauliCode.Z: _PAULI_Z,
    PauliCode.X: _PAULI_X,
    PauliCode.IY: _PAULI_IY,
}

# 00 -> identity, 01 -> phase flip, 10 -> bit flip, 11 -> both.
_PAULI_TO_BITS = {
    PauliCode.I: (0, 0),
    PauliCode.Z: (0, 1),
    PauliCode.X: (1, 0),
    PauliCode.IY: (1, 1),
}
_BITS_TO_PAULI = {v: k for k, v in _PAULI_TO_BITS.items()}


class BellOutcome(Enum):
    """Result of a joint measurement in the maximally entangled basis."""

    PHI_PLUS = "phi+"
    PHI_MINUS = "phi-"
    PSI_PLUS = "psi+"
    PSI_MINUS = "psi-"

    @property
    def vector(self) -> np.ndarray:
        return _BELL_VECTORS[self].copy()

    @property
    def bits(self) -> Tuple[int, int]:
        """Two-bit code carried by this outcome under dense coding."""
        return _PAULI_TO_BITS[self.pauli]

    @property
    def pauli(self) -> PauliCode:
        return _BELL_TO_PAULI[self]

    @classmethod
    def from_pauli(cls, code: PauliCode) -> "BellOutcome":
        return _PAULI_TO_BELL[code]


_BELL_ORDER = (
    BellOutcome.PHI_PLUS,
    BellOutcome.PHI_MINUS,
    BellOutcome.PSI_PLUS,
    BellOutcome.PSI_MINUS,
)

_BELL_VECTORS = {
    BellOutcome.PHI_PLUS: np.array([_SQRT_HALF, 0, 0, _SQRT_HALF], dtype=complex),
    BellOutcome.PHI_MINUS: np.array([_SQRT_HALF, 0, 0, -_SQRT_HALF], dtype=complex),
    BellOutcome.PSI_PLUS: np.array([0, _SQRT_HALF, _SQRT_HALF, 0], dtype=complex),
    BellOutcome.PSI_MINUS: np.array([0, _SQRT_HALF, -_SQRT_HALF, 0], dtype=complex),
}

_BELL_MATRIX = np.stack([_BELL_VECTORS[o] for o in _BELL_ORDER])

# Applying the coded operation to the first half of a phi+ pair lands exactly
# on the matching Bell state, which is what makes dense coding decodable.
_BELL_TO_PAULI = {
    BellOutcome.PHI_PLUS: PauliCode.I,
    BellOutcome.PHI_MINUS: PauliCode.Z,
    BellOutcome.PSI_PLUS: PauliCode.X,
    BellOutcome.PSI_MINUS: PauliCode.IY,
}
_PAULI_TO_BELL = {v: k for k, v in _BELL_TO_PAULI.items()}


@dataclass(frozen=True)
class QubitRef:
    """Opaque handle for one simulated qubit; ids are never reused."""

    uid: int

    def __repr__(self) -> str:
        return f"q{self.uid}"


@dataclass(frozen=True)
class MeasurementOutcome:
    basis: Basis
    bit: int


@dataclass(frozen=True)
class BellPairCheck:
    """Diagnostic result of :func:`is_bell_product`."""

    passed: bool
    purity: float
    fidelity: float


class DeadQubitError(RuntimeError):
    """Raised when an operation addresses a discarded or unknown qubit."""


class EntangledDiscardError(RuntimeError):
    """Raised when trying to drop a qubit still entangled with live ones."""


class NonUnitaryError(ValueError):
    """Raised when a supplied gate matrix is not unitary within tolerance."""


def state_vector_for_label(label: str) -> np.ndarray:
    """Return the 2-vector for one of the four preparation labels."""
    try:
        return _SINGLE_STATES[label].copy()
    except KeyError:
        raise ValueError(f"unknown state label {label!r}") from None


_EIGENSTATE_LABEL = {
    (Basis.Z, 0): "0",
    (Basis.Z, 1): "1",
    (Basis.X, 0): "+",
    (Basis.X, 1): "-",
}


def eigenstate_label(basis: Basis, bit: int) -> str:
    """Preparation label of the post-measurement state for (basis, bit)."""
    return _EIGENSTATE_LABEL[(basis, bit & 1)]


def bell_vector(outcome: BellOutcome) -> np.ndarray:
    return _BELL_VECTORS[outcome].copy()


def cnot_matrix() -> np.ndarray:
    """The controlled-NOT unitary, control on the first tensor slot."""
    return _CNOT.copy()


def ghz_vector(k: int) -> np.ndarray:
    """Amplitudes of the k-party all-zero/all-one superposition."""
    if k < 2:
        raise ValueError("ghz_vector needs k >= 2")
    vec = np.zeros(2**k, dtype=complex)
    vec[0] = _SQRT_HALF
    vec[-1] = _SQRT_HALF
    return vec


def _check_unitary(u: np.ndarray, dim: int) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.shape != (dim, dim):
        raise NonUnitaryError(f"expected a {dim}x{dim} matrix, got {u.shape}")
    if np.max(np.abs(u.conj().T @ u - np.eye(dim))) > UNITARY_ATOL:
        raise NonUnitaryError("matrix is not unitary within tolerance")
    return u


class StateVector:
    """One independent tensor factor of the run's global state."""

    __slots__ = ("amps", "qubit_order")

    def __init__(self, amps: np.ndarray, qubit_order: List[QubitRef]):
        self.amps = amps
        self.qubit_order = qubit_order

    @property
    def n(self) -> int:
        return len(self.qubit_order)

    def axis_of(self, q: QubitRef) -> int:
        return self.qubit_order.index(q)

    def norm_error(self) -> float:
        return abs(float(np.sum(np.abs(self.amps) ** 2)) - 1.0)

    def flat(self) -> np.ndarray:
        """Amplitudes flattened in qubit_order, first qubit most significant."""
        return self.amps.reshape(-1).copy()


class QuantumRegister:
    """All live qubits of one protocol run, kept factored by interaction."""

    def __init__(self) -> None:
        self._next_uid = 0
        self._next_fid = 0
        self._factors: Dict[int, StateVector] = {}
        self._where: Dict[QubitRef, int] = {}
        self._consumed: set = set()

    # -- bookkeeping -------------------------------------------------------

    def _new_ref(self) -> QubitRef:
        ref = QubitRef(self._next_uid)
        self._next_uid += 1
        return ref

    def _add_factor(self, amps: np.ndarray, refs: List[QubitRef]) -> None:
        fid = self._next_fid
        self._next_fid += 1
        self._factors[fid] = StateVector(amps, refs)
        for r in refs:
            self._where[r] = fid

    def _locate(self, q: QubitRef) -> Tuple[int, StateVector]:
        try:
            fid = self._where[q]
        except KeyError:
            if q in self._consumed:
                raise DeadQubitError(f"{q} was already discarded") from None
            raise DeadQubitError(f"{q} does not belong to this register") from None
        return fid, self._factors[fid]

    def _merge(self, fid_a: int, fid_b: int) -> Tuple[int, StateVector]:
        if fid_a == fid_b:
            return fid_a, self._factors[fid_a]
        a = self._factors[fid_a]
        b = self._factors.pop(fid_b)
        a.amps = np.multiply.outer(a.amps, b.amps)
        a.qubit_order = a.qubit_order + b.qubit_order
        for r in b.qubit_order:
            self._where[r] = fid_a
        return fid_a, a

    def is_live(self, q: QubitRef) -> bool:
        return q in self._where

    def live_qubits(self) -> List[QubitRef]:
        return list(self._where)

    def factor_of(self, q: QubitRef) -> StateVector:
        return self._locate(q)[1]

    def max_norm_error(self) -> float:
        if not self._factors:
            return 0.0
        return max(sv.norm_error() for sv in self._factors.values())

    # -- preparation -------------------------------------------------------

    def prepare_single(self, label: str) -> QubitRef:
        """Create one fresh qubit in |0>, |1>, |+> or |->."""
        vec = state_vector_for_label(label)
        ref = self._new_ref()
        self._add_factor(vec, [ref])
        return ref

    def prepare_epr_pair(self) -> Tuple[QubitRef, QubitRef]:
        """Create two fresh qubits in the maximally entangled phi+ state."""
        amps = np.zeros((2, 2), dtype=complex)
        amps[0, 0] = _SQRT_HALF
        amps[1, 1] = _SQRT_HALF
        a, b = self._new_ref(), self._new_ref()
        self._add_factor(amps, [a, b])
        return a, b

    def prepare_ghz(self, k: int) -> List[QubitRef]:
        """Create k fresh qubits sharing an all-zero/all-one superposition."""
        if k < 2:
            raise ValueError("a shared multi-party state needs k >= 2 qubits")
        amps = ghz_vector(k).reshape((2,) * k)
        refs = [self._new_ref() for _ in range(k)]
        self._add_factor(amps, refs)
        return refs

    # -- unitaries ---------------------------------------------------------

    def _apply_1q(self, sv: StateVector, k: int, u: np.ndarray) -> None:
        if sv.amps.ndim == 1:
            sv.amps = u @ sv.amps
        else:
            sv.amps = np.moveaxis(np.tensordot(u, sv.amps, axes=(1, k)), 0, k)

    def _apply_2q(self, sv: StateVector, ka: int, kb: int, u4: np.ndarray) -> None:
        u = u4.reshape(2, 2, 2, 2)
        amps = np.tensordot(u, sv.amps, axes=([2, 3], [ka, kb]))
        sv.amps = np.moveaxis(amps, [0, 1], [ka, kb])

    def apply_pauli(self, q: QubitRef, code: PauliCode) -> None:
        if code is PauliCode.I:
            return
        fid, sv = self._locate(q)
        self._apply_1q(sv, sv.axis_of(q), code.matrix)

    def apply_hadamard(self, q: QubitRef) -> None:
        fid, sv = self._locate(q)
        self._apply_1q(sv, sv.axis_of(q), _HADAMARD)

    def apply_cnot(self, control: QubitRef, target: QubitRef) -> None:
        if control == target:
            raise ValueError("control and target must differ")
        fid_c, _ = self._locate(control)
        fid_t, _ = self._locate(target)
        _, sv = self._merge(fid_c, fid_t)
        self._apply_2q(sv, sv.axis_of(control), sv.axis_of(target), _CNOT)

    def apply_two_qubit_unitary(self, u: np.ndarray, qa: QubitRef, qb: QubitRef) -> None:
        """Apply an arbitrary (validated) 4x4 unitary with qa as the first axis."""
        if qa == qb:
            raise ValueError("the two qubits must differ")
        u = _check_unitary(u, 4)
        fid_a, _ = self._locate(qa)
        fid_b, _ = self._locate(qb)
        _, sv = self._merge(fid_a, fid_b)
        self._apply_2q(sv, sv.axis_of(qa), sv.axis_of(qb), u)

    # -- measurement -------------------------------------------------------

    def measure(self, q: QubitRef, basis: Basis, rng: np.random.Generator) -> MeasurementOutcome:
        """Projective measurement; the qubit survives in the post-measurement state."""
        fid, sv = self._locate(q)
        k = sv.axis_of(q)
        if basis is Basis.X:
            self._apply_1q(sv, k, _HADAMARD)
        amps = sv.amps
        if amps.ndim == 1:
            a1 = amps[1]
            p1 = float(a1.real * a1.real + a1.imag * a1.imag)
            bit = 1 if rng.random() < p1 else 0
            kept = amps[bit] / math.sqrt(p1 if bit else 1.0 - p1)
            new = np.zeros(2, dtype=complex)
            new[bit] = kept
            sv.amps = new
        else:
            sl: List = [slice(None)] * amps.ndim
            sl[k] = 1
            branch = amps[tuple(sl)]
            p1 = float(np.sum(branch.real**2 + branch.imag**2))
            bit = 1 if rng.random() < p1 else 0
            sl[k] = 1 - bit
            amps[tuple(sl)] = 0.0
            amps *= 1.0 / math.sqrt(p1 if bit else 1.0 - p1)
        if basis is Basis.X:
            self._apply_1q(sv, k, _HADAMARD)
        return MeasurementOutcome(basis, bit)

    def bell_measure(self, q1: QubitRef, q2: QubitRef, rng: np.random.Generator) -> BellOutcome:
        """Joint projective measurement of (q1, q2) in the Bell basis.

        The pair collapses onto the reported Bell state; both qubits stay in
        the register so callers may keep using or discard them.
        """
        if q1 == q2:
            raise ValueError("bell_measure needs two distinct qubits")
        fid1, _ = self._locate(q1)
        fid2, _ = self._locate(q2)
        _, sv = self._merge(fid1, fid2)
        ka, kb = sv.axis_of(q1), sv.axis_of(q2)
        moved = np.moveaxis(sv.amps, [ka, kb], [0, 1])
        rest_shape = moved.shape[2:]
        arr = moved.reshape(4, -1)
        coeffs = _BELL_MATRIX.conj() @ arr
        probs = np.sum(coeffs.real**2 + coeffs.imag**2, axis=1)
        r = rng.random()
        acc = 0.0
        idx = 3
        for i in range(4):
            acc += probs[i]
            if r < acc:
                idx = i
                break
        picked = coeffs[idx] / math.sqrt(probs[idx])
        new = np.outer(_BELL_MATRIX[idx], picked).reshape((2, 2) + rest_shape)
        sv.amps = np.moveaxis(new, [0, 1], [ka, kb])
        return _BELL_ORDER[idx]

    # -- disposal ----------------------------------------------------------

    def discard(self, q: QubitRef) -> None:
        """Remove a qubit that is in a product state with everything else."""
        fid, sv = self._locate(q)
        if sv.amps.ndim == 1:
            del self._factors[fid]
        else:
            k = sv.axis_of(q)
            moved = np.moveaxis(sv.amps, k, 0)
            rest_shape = moved.shape[1:]
            arr = moved.reshape(2, -1)
            rho = arr @ arr.conj().T
            purity = float(np.trace(rho @ rho).real)
            if purity < 1.0 - PURITY_ATOL:
                raise EntangledDiscardError(f"{q} is still entangled (purity {purity:.6f})")
            evals, evecs = np.linalg.eigh(rho)
            v = evecs[:, int(np.argmax(evals))]
            rest = v.conj() @ arr
            rest = rest / math.sqrt(float(np.sum(np.abs(rest) ** 2)))
            sv.amps = rest.reshape(rest_shape)
            sv.qubit_order = [r for r in sv.qubit_order if r != q]
        del self._where[q]
        self._consumed.add(q)

    # -- inspection --------------------------------------------------------

    def reduced_density(self, qubits: Sequence[QubitRef]) -> np.ndarray:
        """Density matrix of the listed qubits, in the listed order."""
        if len(set(qubits)) != len(qubits):
            raise ValueError("duplicate qubit in reduced_density request")
        by_factor: Dict[int, List[QubitRef]] = {}
        for q in qubits:
            fid, _ = self._locate(q)
            by_factor.setdefault(fid, []).append(q)
        rho: Optional[np.ndarray] = None
        built_order: List[QubitRef] = []
        for fid, qs in by_factor.items():
            sv = self._factors[fid]
            axes = [sv.axis_of(q) for q in qs]
            r = len(qs)
            arr = np.moveaxis(sv.amps, axes, range(r)).reshape(2**r, -1)
            block = arr @ arr.conj().T
            rho = block if rho is None else np.kron(rho, block)
            built_order.extend(qs)
        assert rho is not None
        if built_order != list(qubits):
            m = len(qubits)
            perm = [built_order.index(q) for q in qubits]
            t = rho.reshape((2,) * (2 * m))
            t = np.transpose(t, perm + [m + p for p in perm])
            rho = t.reshape(2**m, 2**m)
        return rho

    def state_fidelity(self, qubits: Sequence[QubitRef], target: np.ndarray) -> float:
        """Overlap <target| rho |target> of the qubits' joint state."""
        target = np.asarray(target, dtype=complex).reshape(-1)
        if target.shape != (2 ** len(qubits),):
            raise ValueError("target vector has the wrong dimension")
        rho = self.reduced_density(qubits)
        return float((target.conj() @ rho @ target).real)


def is_bell_product(register: QuantumRegister, q1: QubitRef, q2: QubitRef) -> BellPairCheck:
    """Check that (q1, q2) form a pure phi+ pair decoupled from the rest.

    Passes only when the pair's reduced state has purity within 1e-9 of one
    (no residual entanglement with anything else) and overlap with the phi+
    state of at least 1 - 1e-9.
    """
    rho = register.reduced_density([q1, q2])
    purity = float(np.trace(rho @ rho).real)
    target = _BELL_VECTORS[BellOutcome.PHI_PLUS]
    fidelity = float((target.conj() @ rho @ target).real)
    passed = purity >= 1.0 - PURITY_ATOL and fidelity >= 1.0 - PURITY_ATOL
    return BellPairCheck(passed, purity, fidelity)


def attempt_clone_unitary(
    u: np.ndarray,
    test_states: Iterable[str] = SINGLE_STATE_LABELS,
    ancilla_label: str = "0",
) -> Dict[str, float]:
    """Score a candidate copying unitary on qubit (x) ancilla.

    For every requested input state ``s`` the candidate is applied to
    s (x) ancilla and the squared overlap with the perfect copy s (x) s is
    returned.  No unitary scores ~1 on all four preparation states at once;
    the harness uses this as a falsification search.
    """
    u = _check_unitary(u, 4)
    anc = state_vector_for_label(ancilla_label)
    scores: Dict[str, float] = {}
    for label in test_states:
        vec = state_vector_for_label(label)
        out = u @ np.kron(vec, anc)
        target = np.kron(vec, vec)
        amp = np.vdot(target, out)
        scores[label] = float((amp * amp.conjugate()).real)
    return scores
