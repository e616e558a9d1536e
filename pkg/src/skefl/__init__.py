"""skefl: secure federated aggregation over homomorphic ciphertext shares.

A client's weighted model update is encrypted under a shared additively
homomorphic key, split into f+1 additive ciphertext shares scattered across
peers, re-blended locally, and summed by an untrusted server — which learns
only the aggregate.  The package bundles the crypto layer, the sharing
scheme, the protocol simulation, a synthetic learning workload, and an
adversary harness that measures what a colluding coalition can recover.
"""

from .atss import (
    ShareDigest,
    ShareSet,
    atss_merge,
    atss_publish,
    atss_resplit,
    atss_split,
    atss_verify,
)
from .crypto import (
    Ciphertext,
    CiphertextVector,
    FixedPointCodec,
    KeyPair,
    decrypt,
    decrypt_vector,
    encrypt,
    encrypt_uniform,
    encrypt_vector,
    he_add,
    he_neg,
    he_scalar_mul,
    keygen,
    load_keys,
    load_public_key,
    save_keys,
)
from .errors import SkeflError
from .protocol import (
    ClientState,
    RoundConfig,
    RoundResult,
    ServerState,
    fedavg_weight,
    run_federated,
    run_round,
    skefl_aggr,
    skefl_dist,
    skefl_garble,
    verify_model,
)
from .simnet import Fabric, Message, MessageKind, RoundTranscript
from .workload import (
    ModelVector,
    SyntheticTask,
    TrainParams,
    accuracy,
    fedavg_oracle,
    fedavg_trajectory,
    local_train,
    make_task,
)

__version__ = "0.1.0"

__all__ = [
    "Ciphertext",
    "CiphertextVector",
    "ClientState",
    "Fabric",
    "FixedPointCodec",
    "KeyPair",
    "Message",
    "MessageKind",
    "ModelVector",
    "RoundConfig",
    "RoundResult",
    "RoundTranscript",
    "ServerState",
    "ShareDigest",
    "ShareSet",
    "SkeflError",
    "SyntheticTask",
    "TrainParams",
    "accuracy",
    "atss_merge",
    "atss_publish",
    "atss_resplit",
    "atss_split",
    "atss_verify",
    "decrypt",
    "decrypt_vector",
    "encrypt",
    "encrypt_uniform",
    "encrypt_vector",
    "fedavg_oracle",
    "fedavg_trajectory",
    "fedavg_weight",
    "he_add",
    "he_neg",
    "he_scalar_mul",
    "keygen",
    "load_keys",
    "load_public_key",
    "local_train",
    "make_task",
    "run_federated",
    "run_round",
    "save_keys",
    "skefl_aggr",
    "skefl_dist",
    "skefl_garble",
    "verify_model",
]
