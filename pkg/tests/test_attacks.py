import math

import numpy as np
import pytest

from conftest import make_config
from tokenmark import attacks as atk
from tokenmark.detect import DetectorOptions, score
from tokenmark.errors import BudgetError, ConfigError
from tokenmark.generate import DecodeSpec, TokenSequence, generate
from tokenmark.prf import SeedKind


NO_SKIP = DetectorOptions(skip_repeated_ngrams=False)


@pytest.fixture(scope="module")
def hard_watermarked(toy_lm):
    lm, _, ids = toy_lm
    config = make_config(delta=math.inf, vocab_size=lm.vocab_size)
    seq = generate(lm, ids[:3], config,
                   DecodeSpec(strategy="multinomial", max_tokens=200, seed=41))
    return seq, config


@pytest.fixture(scope="module")
def soft_watermarked(toy_lm):
    lm, _, ids = toy_lm
    config = make_config(delta=2.0, vocab_size=lm.vocab_size)
    seqs = [generate(lm, ids[7 * i:7 * i + 3], config,
                     DecodeSpec(strategy="multinomial", max_tokens=120,
                                seed=600 + i))
            for i in range(30)]
    return seqs, config


class TestBudget:
    def test_validation(self):
        with pytest.raises(ConfigError):
            atk.AttackBudget(epsilon=0.0)
        with pytest.raises(ConfigError):
            atk.AttackBudget(epsilon=1.5)
        assert atk.AttackBudget(epsilon=0.1).target_edits(200) == 20
        assert atk.AttackBudget(epsilon=0.004).target_edits(200) == 0


class TestSubstituteAttack:
    def test_zero_budget_is_identity(self, soft_watermarked, toy_lm):
        seqs, config = soft_watermarked
        lm, _, _ = toy_lm
        oracle = atk.NGramReplacementOracle(lm)
        rng = np.random.Generator(np.random.PCG64(1))
        attacked, log = atk.substitute_attack(
            seqs[0], atk.AttackBudget(epsilon=0.004), oracle, rng)
        assert attacked == seqs[0]
        assert len(log) == 0
        assert score(attacked, config).z == score(seqs[0], config).z

    def test_edit_log_replay(self, soft_watermarked, toy_lm):
        seqs, config = soft_watermarked
        lm, _, _ = toy_lm
        oracle = atk.NGramReplacementOracle(lm)
        rng = np.random.Generator(np.random.PCG64(2))
        attacked, log = atk.substitute_attack(
            seqs[1], atk.AttackBudget(epsilon=0.2), oracle, rng)
        assert atk.replay_edits(seqs[1], log) == attacked
        assert len(log) == 24

    def test_budget_lowers_mean_z(self, soft_watermarked, toy_lm):
        seqs, config = soft_watermarked
        lm, _, _ = toy_lm
        oracle = atk.NGramReplacementOracle(lm)
        rng = np.random.Generator(np.random.PCG64(3))
        z_before, z_after = [], []
        for seq in seqs[:15]:
            z_before.append(score(seq, config).z)
            attacked, _ = atk.substitute_attack(
                seq, atk.AttackBudget(epsilon=0.15), oracle, rng)
            z_after.append(score(attacked, config).z)
        assert np.mean(z_after) < np.mean(z_before) - 1.0

    def test_replacement_color_audit(self, hard_watermarked, toy_lm):
        # On fully green text, each replaced position turns red with
        # probability ~1-gamma and reseeds the following position.
        seq, config = hard_watermarked
        lm, _, _ = toy_lm
        oracle = atk.NGramReplacementOracle(lm)
        rng = np.random.Generator(np.random.PCG64(4))
        flipped = downstream = edits = 0
        for rep in range(12):
            attacked, log = atk.substitute_attack(
                seq, atk.AttackBudget(epsilon=0.15), oracle,
                np.random.Generator(np.random.PCG64(100 + rep)))
            colors = score(attacked, config, NO_SKIP).colors
            edited = {e["pos"] for e in log.edits}
            for e in log.edits:
                pos = e["pos"]
                if attacked.generated[pos] != seq.generated[pos]:
                    edits += 1
                    flipped += colors[pos] == "red"
                    nxt = pos + 1
                    if nxt < len(colors) and nxt not in edited:
                        downstream += colors[nxt] == "red"
        assert abs(flipped / edits - 0.5) < 0.06
        assert abs(downstream / edits - 0.5) < 0.12


class TestInsertDelete:
    def test_insert_dilutes_green_fraction(self, hard_watermarked):
        seq, config = hard_watermarked
        t = len(seq.generated)
        fracs = []
        for i in range(25):
            rng = np.random.Generator(np.random.PCG64(50 + i))
            attacked, _ = atk.insert_attack(seq, atk.AttackBudget(epsilon=0.25), rng)
            rep = score(attacked, config, NO_SKIP)
            fracs.append(rep.green_count / rep.t_counted)
        k = int(0.25 * t)
        cap = (t + k * config.gamma) / (t + k)
        assert np.mean(fracs) <= cap + 0.02
        assert np.mean(fracs) < 1.0

    def test_delete_perturbs_at_most_one_downstream_color(self, hard_watermarked):
        seq, config = hard_watermarked
        rng = np.random.Generator(np.random.PCG64(60))
        attacked, log = atk.delete_attack(seq, atk.AttackBudget(epsilon=0.005), rng)
        assert len(log) == 1
        pos = log.edits[0]["pos"]
        colors = score(attacked, config, NO_SKIP).colors
        # All tokens were green; after one deletion only the token that
        # now follows the splice point can have changed color.
        reds = [i for i, c in enumerate(colors) if c == "red"]
        assert all(i == pos for i in reds)

    def test_zero_deletions_identity(self, soft_watermarked):
        seqs, _ = soft_watermarked
        rng = np.random.Generator(np.random.PCG64(61))
        attacked, log = atk.delete_attack(seqs[0], atk.AttackBudget(epsilon=0.005),
                                          rng)
        assert len(log) == 0
        assert attacked == seqs[0]

    def test_over_deletion_rejected(self):
        seq = TokenSequence.make([1], [2, 3, 4], 8)
        rng = np.random.Generator(np.random.PCG64(62))
        with pytest.raises(BudgetError):
            atk.delete_attack(seq, atk.AttackBudget(epsilon=1.0), rng, min_len=2)

    def test_insert_replay(self, soft_watermarked):
        seqs, _ = soft_watermarked
        rng = np.random.Generator(np.random.PCG64(63))
        attacked, log = atk.insert_attack(seqs[2], atk.AttackBudget(epsilon=0.1), rng)
        assert atk.replay_edits(seqs[2], log) == attacked


class TestWorstCase:
    def test_reference_flip_arithmetic(self):
        assert abs(atk.worst_case_flip_z(1000, 200, 0.5, h=1) - 6.3246) < 1e-3

    def test_zero_flips_fully_green(self):
        assert abs(atk.worst_case_flip_z(400, 0, 0.5) - 20.0) < 1e-12
        z = atk.worst_case_flip_z(200, 0, 0.25)
        assert abs(z - (200 * 0.75) / math.sqrt(200 * 0.25 * 0.75)) < 1e-12

    def test_clamps_at_zero_green(self):
        z = atk.worst_case_flip_z(100, 100, 0.5, h=1)
        assert z == (0 - 50) / math.sqrt(25)

    def test_constructed_attack_matches_formula(self, hard_watermarked):
        seq, config = hard_watermarked
        flips = 40
        attacked = atk.make_worst_case_attack(seq, config, flips=flips)
        rep = score(attacked, config, NO_SKIP)
        t = len(seq.generated)
        assert rep.green_count == t - 2 * flips
        assert abs(rep.z - atk.worst_case_flip_z(t, flips, 0.5, h=1)) < 1e-12

    def test_random_flips_cost_one_green_each(self, hard_watermarked):
        # Without watermark knowledge each flip costs ~1 green token at
        # gamma=.5 (half for the position itself, half downstream).
        seq, config = hard_watermarked
        base = score(seq, config, NO_SKIP).green_count
        losses = []
        for i in range(60):
            rng = np.random.Generator(np.random.PCG64(70 + i))
            gen = list(seq.generated)
            pos = int(rng.integers(0, len(gen) - 1))
            old = gen[pos]
            while gen[pos] == old:
                gen[pos] = int(rng.integers(0, config.vocab_size))
            attacked = TokenSequence.make(seq.prompt, gen, config.vocab_size)
            losses.append(base - score(attacked, config, NO_SKIP).green_count)
        assert abs(np.mean(losses) - 1.0) < 0.35


class TestAmplification:
    def test_left_hash_h1_self_plus_downstream(self):
        config = make_config(vocab_size=64, h=1)
        rng = np.random.Generator(np.random.PCG64(80))
        amp = atk.amplification_factor(config, n_trials=3000, rng=rng,
                                       include_self=True)
        assert abs(amp - 1.0) < 0.1

    def test_left_hash_h5_downstream_amplification(self):
        config = make_config(vocab_size=64, h=5)
        rng = np.random.Generator(np.random.PCG64(81))
        amp = atk.amplification_factor(config, n_trials=3000, rng=rng,
                                       include_self=False)
        assert abs(amp - 2.5) < 0.2

    def test_self_hash_h1_total_one(self):
        config = make_config(vocab_size=64, kind=SeedKind.SELF_HASH, h=1)
        rng = np.random.Generator(np.random.PCG64(82))
        amp = atk.amplification_factor(config, n_trials=3000, rng=rng,
                                       include_self=True)
        assert abs(amp - 1.0) < 0.1

    def test_self_hash_suppresses_window_growth(self):
        # The naive rule's downstream damage grows linearly in h; the
        # self-hash rule's stays bounded near one.
        rng = np.random.Generator(np.random.PCG64(83))
        naive = atk.amplification_factor(make_config(vocab_size=64, h=8),
                                         n_trials=1500, rng=rng)
        robust = atk.amplification_factor(
            make_config(vocab_size=64, kind=SeedKind.SELF_HASH, h=8),
            n_trials=1500, rng=rng)
        assert naive > 3.5
        assert robust < 1.1


class TestInterleaveStrip:
    def test_stripping_fillers_erases_evidence(self, toy_lm):
        lm, _, ids = toy_lm
        config = make_config(gamma=0.5, delta=5.0, vocab_size=lm.vocab_size)
        clean = generate(lm, ids[:3], config,
                         DecodeSpec(strategy="multinomial", max_tokens=150, seed=9))
        attacked = atk.interleave_strip_attack(lm, ids[:3], config, n_tokens=150,
                                               filler_id=300, seed=9)
        assert score(clean, config).z > 8.0
        assert score(attacked, config).z < 2.5


class TestRoc:
    def test_perfect_separation(self):
        fpr, tpr, auc = atk.roc_curve([5.0, 6.0, 7.0], [0.1, 0.2, 0.3])
        assert auc == 1.0
        assert fpr[0] == 0.0 and tpr[-1] == 1.0

    def test_identical_distributions_chance_level(self):
        rng = np.random.Generator(np.random.PCG64(90))
        a = rng.normal(size=800)
        b = rng.normal(size=800)
        _, _, auc = atk.roc_curve(a, b)
        assert abs(auc - 0.5) < 0.05

    def test_ties_counted_half(self):
        _, _, auc = atk.roc_curve([1.0, 1.0], [1.0, 1.0])
        assert auc == 0.5

    def test_empty_rejected(self):
        with pytest.raises(ConfigError):
            atk.roc_curve([], [1.0])

    def test_standard_error_positive(self):
        assert atk.auc_standard_error(0.97, 200, 200) > 0
