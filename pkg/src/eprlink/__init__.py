"""Simulator for mediated entanglement establishment and direct quantum messaging.

Two relay nodes (TP1, TP2) help two strangers (Alice, Bob) end up holding
shared maximally entangled pairs, verified by decoy-photon discussions and a
correlation spot check.  On top of the established pairs rides a dense-coding
message relay.  The package also ships an adversary library and a Monte Carlo
harness that compares empirical eavesdropping-detection rates against the
closed-form values.
"""

from .qcore import (
    Basis,
    BellOutcome,
    MeasurementOutcome,
    PauliCode,
    QuantumRegister,
    QubitRef,
    StateVector,
    attempt_clone_unitary,
    is_bell_product,
)
from .channels import (
    ALICE,
    BOB,
    EVE,
    TP1,
    TP2,
    ClassicalMessage,
    Network,
    PartyId,
    QuantumMessage,
    Topology,
    Transcript,
    TrojanTag,
    participant,
)
from .protocol import (
    EstablishmentConfig,
    EstablishmentOutcome,
    EstablishStatus,
    run_establishment,
    run_multiparty,
)
from .qsdc import Message, QsdcOutcome, QsdcStatus, mac_protect, mac_verify, run_qsdc
from .adversaries import AttackKind, AttackReport, AttackSpec, build_adversary
from .harness import (
    AggregateReport,
    ExperimentConfig,
    GameError,
    GameInstance,
    GameResult,
    GameSpec,
    NoAnalyticOracle,
    TrialReport,
    analytic_detection,
    attack_from_name,
    emit_report,
    load_config,
    run_distinguishing_game,
    run_experiment,
    run_sweep,
)

__version__ = "0.1.0"
