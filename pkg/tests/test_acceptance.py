"""Acceptance gate: the nine release criteria for the secure-aggregation stack.

Each test pins the advertised guarantee at its stated tolerance:

1. encrypted aggregation equals plaintext FedAvg within the fixed-point bound,
   at 1024-bit Paillier, under a wall-clock budget;
2. share merge inverts share split bit-exactly, order independent;
3. share verification accepts every honest round and rejects every tampered
   or incomplete one;
4. no coalition of up to f clients plus the server ever reconstructs a
   victim's weighted model, and the shares they do see are uniform;
5. the distinguishing game stays at chance accuracy (and the garbling-off
   control shows the game has power);
6. message complexity is exactly n*f + n + n per round and 2f per audit;
7. cost scales linearly in the vector length and ~quadratically in the
   federation size;
8. a full encrypted training run tracks the plaintext run round for round
   and reaches the same held-out accuracy;
9. identical configs and seeds reproduce transcripts and reports
   byte-for-byte (timing fields excluded).

The expensive criteria (1, 4, 5) dominate the suite's runtime; everything is
deterministic, so failures reproduce exactly.
"""

import itertools
import json
import math
import random
import statistics
import time

import pytest
from scipy.stats import chisquare

from skefl.adversary import distinguishing_game, staged_attack_round, victim_share_vectors
from skefl.atss import atss_merge, atss_split, atss_verify
from skefl.cli import main as cli_main
from skefl.crypto import (
    FixedPointCodec,
    decrypt_vector,
    keygen,
    uniform_vector,
)
from skefl.protocol import RoundConfig, build_parties, run_round, run_federated, verify_model
from skefl.rng import derive_rng
from skefl.simnet import Fabric, MessageKind
from skefl.workload import (
    ModelVector,
    TrainParams,
    accuracy,
    fedavg_oracle,
    fedavg_trajectory,
    make_task,
)

SCALE = 10**6
MODEL_SETS = 50
RUNTIME_BUDGET_S = 300.0


def tolerance(n: int, f: int, scale: int = SCALE) -> float:
    return (n + 1) * (f + 2) / scale


@pytest.fixture(scope="module")
def paillier_1024():
    return keygen(1024, 20240817, "paillier")


@pytest.fixture(scope="module")
def mock_64():
    return keygen(64, 20240817, "mock")


def fresh_round(keys, codec, n, f, m, seed, models):
    cfg = RoundConfig(
        n=n, f=f, m=m, sample_counts=tuple(100 + 17 * i for i in range(n)),
        codec=codec, seed=seed,
    )
    net = Fabric()
    clients, server = build_parties(cfg, keys, net)
    for client, model in zip(clients, models):
        client.local_model = model
    return run_round(clients, server, cfg, net, 1), cfg, net


# ---------------------------------------------------------------------------
# 1. Aggregation equivalence
# ---------------------------------------------------------------------------


def test_criterion_1_encrypted_aggregation_matches_fedavg(paillier_1024):
    codec = FixedPointCodec(SCALE, paillier_1024.public.ring_size)
    budget_clock = 0.0
    for n, f in ((3, 1), (5, 2), (7, 3)):
        tol = tolerance(n, f)
        for m in (10, 1000):
            rng = random.Random(1000 * n + m)
            for trial in range(MODEL_SETS):
                models = [
                    ModelVector(tuple(rng.uniform(-1.0, 1.0) for _ in range(m)))
                    for _ in range(n)
                ]
                start = time.perf_counter()
                result, cfg, _ = fresh_round(
                    paillier_1024, codec, n, f, m, seed=trial, models=models
                )
                if m == 1000:
                    budget_clock += time.perf_counter() - start
                oracle = fedavg_oracle(models, list(cfg.sample_counts))
                worst = max(
                    abs(got - want)
                    for got, want in zip(result.global_model, oracle.values)
                )
                assert worst <= tol, (n, f, m, trial, worst)
    assert budget_clock < RUNTIME_BUDGET_S, f"m=1000 sweep took {budget_clock:.0f}s"


# ---------------------------------------------------------------------------
# 2. Share split/merge inversion
# ---------------------------------------------------------------------------


def test_criterion_2_merge_inverts_split_bit_exactly(paillier_1024, mock_64):
    start = time.perf_counter()
    rng = random.Random(2)
    peers = tuple(range(2, 12))
    for trial in range(1000):
        vec = uniform_vector(mock_64.public, 32, rng)
        f = trial % 6
        shares = atss_split(
            vec, f, mock_64.public, rng, owner=1, round_no=1, peers=peers
        ).shares
        merged = atss_merge(shares)
        assert [c.value for c in merged] == [c.value for c in vec]
        if f >= 2:
            perm = list(shares)
            rng.shuffle(perm)
            remerged = atss_merge(perm)
            assert [c.value for c in remerged] == [c.value for c in vec]
    for trial in range(20):
        vec = uniform_vector(paillier_1024.public, 8, rng)
        f = trial % 4
        shares = atss_split(
            vec, f, paillier_1024.public, rng, owner=1, round_no=1, peers=peers
        ).shares
        merged = atss_merge(shares)
        assert [c.value for c in merged] == [c.value for c in vec]
    assert time.perf_counter() - start < 60.0


# ---------------------------------------------------------------------------
# 3. Verification accept/reject
# ---------------------------------------------------------------------------


def test_criterion_3_verification_has_no_false_results(mock_64):
    from skefl.atss import atss_publish
    from skefl.crypto import Ciphertext, CiphertextVector

    rng = random.Random(3)
    peers = tuple(range(2, 8))
    false_accepts = 0
    for trial in range(1000):
        vec = uniform_vector(mock_64.public, 8, rng)
        shares = atss_split(
            vec, 2, mock_64.public, rng, owner=1, round_no=1, peers=peers
        ).shares
        digest = atss_publish(vec, owner=1, round_no=1)
        assert atss_verify(digest, shares) == 1

        which = rng.randrange(3)
        elem = rng.randrange(8)
        bit = rng.randrange(64)
        tampered_vec = CiphertextVector(
            tuple(
                Ciphertext(c.value ^ (1 << bit), mock_64.public) if i == elem else c
                for i, c in enumerate(shares[which].elements)
            )
        )
        tampered = list(shares)
        tampered[which] = tampered_vec
        false_accepts += atss_verify(digest, tampered)

        short = [s for i, s in enumerate(shares) if i != which]
        false_accepts += atss_verify(digest, short)
    assert false_accepts == 0


# ---------------------------------------------------------------------------
# 4. Collusion resistance, exhaustively over coalitions
# ---------------------------------------------------------------------------


def test_criterion_4_no_coalition_reconstructs_and_shares_stay_uniform(mock_64):
    codec = FixedPointCodec(SCALE, mock_64.public.ring_size)
    for n in (3, 5, 7):
        f = (n - 1) // 2
        coalitions = list(itertools.combinations(range(2, n + 1), f))
        per_coalition = math.ceil(10_000 / len(coalitions))
        low_bits = []
        for coalition in coalitions:
            for trial in range(per_coalition):
                cfg = RoundConfig(
                    n=n, f=f, m=2, sample_counts=(100,) * n, codec=codec,
                    seed=hash((n, coalition, trial)) & 0xFFFFFFFF,
                )
                outcome, view, _ = staged_attack_round(cfg, mock_64, set(coalition), 1)
                assert not outcome.exact, (n, coalition, trial)
                assert outcome.shares_found <= f
                seen = victim_share_vectors(view)
                if seen:
                    low_bits.append(atss_merge(seen)[0].value % 8)
        counts = [low_bits.count(b) for b in range(8)]
        assert sum(counts) >= 2000, n
        assert chisquare(counts).pvalue > 0.01, (n, counts)


# ---------------------------------------------------------------------------
# 5. Distinguishing game at chance level
# ---------------------------------------------------------------------------


def test_criterion_5_distinguishing_game_is_at_chance(mock_64):
    codec = FixedPointCodec(SCALE, mock_64.public.ring_size)
    cfg = RoundConfig(
        n=3, f=1, m=2, sample_counts=(100, 100, 100), codec=codec, seed=5
    )
    game = distinguishing_game(cfg, mock_64, 10_000, 5)
    assert 0.48 <= game.accuracy <= 0.52, game.accuracy
    assert game.passed

    control = distinguishing_game(cfg, mock_64, 1000, 55, garbled=False)
    assert control.accuracy >= 0.99, control.accuracy


# ---------------------------------------------------------------------------
# 6. Exact message complexity
# ---------------------------------------------------------------------------


def test_criterion_6_message_counts_are_exact(mock_64):
    codec = FixedPointCodec(SCALE, mock_64.public.ring_size)
    for n, f in ((3, 1), (5, 2), (7, 3), (4, 1), (6, 2)):
        cfg = RoundConfig(
            n=n, f=f, m=3, sample_counts=(100,) * n, codec=codec, seed=6
        )
        net = Fabric()
        clients, server = build_parties(cfg, mock_64, net)
        rng = random.Random(600 + 10 * n + f)
        for c in clients:
            c.local_model = ModelVector(tuple(rng.uniform(-1, 1) for _ in range(3)))
        result = run_round(clients, server, cfg, net, 1)
        assert result.msg_counts == {"c2c": n * f, "c2s": n, "s2c": n}
        assert sum(result.msg_counts.values()) == n * f + n + n

        before = net.transcript(1).count()
        assert verify_model(clients[0], clients, net, 1) == 1
        tr = net.transcript(1)
        assert tr.count() - before == 2 * f
        assert tr.count(MessageKind.VERIFY_REQUEST) == f
        assert tr.count(MessageKind.VERIFY_RESPONSE) == f


# ---------------------------------------------------------------------------
# 7. Cost scaling
# ---------------------------------------------------------------------------


def test_criterion_7_split_time_scales_linearly_in_m(paillier_1024):
    peers = (2, 3)

    def median_split_ms(m: int) -> float:
        times = []
        for rep in range(7):
            rng = derive_rng(7, "scale", m, rep)
            vec = uniform_vector(paillier_1024.public, m, rng)
            start = time.perf_counter()
            atss_split(vec, 1, paillier_1024.public, rng, owner=1, round_no=1, peers=peers)
            times.append((time.perf_counter() - start) * 1000)
        return statistics.median(times)

    ratio = median_split_ms(1200) / median_split_ms(600)
    assert 1.5 <= ratio <= 2.5, ratio


def test_criterion_7_he_op_count_scales_quadratically_in_n(mock_64):
    codec = FixedPointCodec(SCALE, mock_64.public.ring_size)

    def he_ops(n: int, f: int) -> int:
        cfg = RoundConfig(
            n=n, f=f, m=50, sample_counts=(100,) * n, codec=codec, seed=7
        )
        net = Fabric()
        clients, server = build_parties(cfg, mock_64, net)
        rng = random.Random(700 + n)
        for c in clients:
            c.local_model = ModelVector(tuple(rng.uniform(-1, 1) for _ in range(50)))
        ops = run_round(clients, server, cfg, net, 1).op_counts
        return ops["he_add"] + ops["he_neg"] + ops["he_scalar_mul"]

    # federation doubling that preserves the 2f+1 = n threshold shape
    for (n, f), (n2, f2) in (((3, 1), (7, 3)), ((5, 2), (11, 5))):
        ratio = he_ops(n2, f2) / he_ops(n, f)
        assert 3.0 <= ratio <= 5.0, ((n, f), (n2, f2), ratio)


# ---------------------------------------------------------------------------
# 8. End-to-end training trajectory
# ---------------------------------------------------------------------------


def test_criterion_8_encrypted_training_tracks_plaintext(paillier_1024):
    n, f, rounds = 5, 2, 10
    task = make_task(n, 200, dim=5, seed=8)
    codec = FixedPointCodec(SCALE, paillier_1024.public.ring_size)
    cfg = RoundConfig(
        n=n, f=f, m=task.model_length, sample_counts=task.sample_counts,
        codec=codec, seed=8,
    )
    params = TrainParams()
    encrypted = run_federated(task, cfg, paillier_1024, rounds, params)
    plaintext = fedavg_trajectory(task, rounds, params, seed=8)

    tol = 10 * tolerance(n, f)
    assert len(encrypted.trajectory) == len(plaintext) == rounds
    for round_no, (enc, plain) in enumerate(zip(encrypted.trajectory, plaintext), 1):
        worst = max(abs(a - b) for a, b in zip(enc.values, plain.values))
        assert worst <= tol, (round_no, worst)

    assert encrypted.holdout_accuracy[-1] > 0.9
    plain_acc = accuracy(plaintext[-1], task.holdout_features, task.holdout_labels)
    assert plain_acc > 0.9


# ---------------------------------------------------------------------------
# 9. Byte-level determinism
# ---------------------------------------------------------------------------


def _read(path):
    with open(path, "rb") as fh:
        return fh.read()


def _rounds_without_timings(path):
    rows = []
    with open(path) as fh:
        for line in fh:
            doc = json.loads(line)
            doc.pop("phase_timings_ms")
            rows.append(doc)
    return rows


def test_criterion_9_repeat_runs_are_byte_identical(tmp_path):
    configs = [
        ["--backend", "mock", "--key-bits", "64", "--n", "5", "--f", "2",
         "--m", "3", "--rounds", "3", "--seed", "90"],
        ["--backend", "paillier", "--key-bits", "128", "--n", "3", "--f", "1",
         "--m", "3", "--rounds", "1", "--seed", "91", "--scale", "10000"],
    ]
    for extra in configs:
        out_a, out_b = tmp_path / ("a" + extra[3]), tmp_path / ("b" + extra[3])
        for out in (out_a, out_b):
            assert cli_main(["run", *extra, "--out", str(out), "--quiet"]) == 0
        assert _read(out_a / "transcript.csv") == _read(out_b / "transcript.csv")
        assert _read(out_a / "transcript.json") == _read(out_b / "transcript.json")
        assert _read(out_a / "summary.json") == _read(out_b / "summary.json")
        assert _rounds_without_timings(out_a / "rounds.jsonl") == _rounds_without_timings(
            out_b / "rounds.jsonl"
        )

    atk_a, atk_b = tmp_path / "atk_a", tmp_path / "atk_b"
    args = ["attack", "--n", "3", "--f", "1", "--m", "2", "--trials", "100",
            "--seed", "92", "--quiet"]
    for out in (atk_a, atk_b):
        assert cli_main(args + ["--out", str(out)]) == 0
    assert _read(atk_a / "attack.json") == _read(atk_b / "attack.json")
