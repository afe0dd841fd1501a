import json
import os

import numpy as np
import pytest

from hopjam import dataset, siamese
from hopjam import imgprep as ip
from hopjam.errors import (
    ConfigurationError,
    DivergenceError,
    SamplingError,
)

TOY = siamese.NetConfig(
    input_side=16,
    in_channels=3,
    conv_channels=(16, 16, 16, 16),
    conv_kernels=(3, 2, 2, 1),
    pool_after=(True, True, True, False),
    embed_dim=16,
)
TOY_TRAIN = siamese.TrainConfig(seed=7)


def toy_params(seed=7):
    return siamese.init_params(TOY, siamese.TrainConfig(seed=seed))


def toy_images(n, seed=0):
    rng = np.random.default_rng(seed)
    return rng.random((n, 3, 16, 16))


# ---------------------------------------------------------------------------
# architecture and primitives
# ---------------------------------------------------------------------------

def test_net_config_rejects_non_multiple_of_16():
    with pytest.raises(ConfigurationError):
        siamese.NetConfig(conv_channels=(64, 100, 128, 256))


def test_net_config_rejects_collapsing_tower():
    with pytest.raises(ConfigurationError):
        siamese.NetConfig(input_side=8, conv_channels=(16,) * 4,
                          conv_kernels=(10, 7, 4, 4))


def test_relu_zeroes_negative_preactivations():
    z = np.array([-3.0, -1e-9, 0.0, 2.5])
    assert np.array_equal(np.maximum(z, 0.0), [0.0, 0.0, 0.0, 2.5])


def test_conv_of_zero_image_outputs_bias():
    beta = 0.37
    x = np.zeros((2, 3, 8, 8))
    w = np.zeros((16, 3, 3, 3))
    y = siamese.conv2d_forward(x, w, np.full(16, beta))
    assert y.shape == (2, 16, 6, 6)
    assert np.all(y == beta)


def test_embedding_lies_in_unit_interval():
    emb, _ = siamese.embed_forward(toy_params(), TOY, toy_images(3))
    assert emb.shape == (3, TOY.embed_dim)
    assert np.all(emb > 0.0) and np.all(emb < 1.0)


def test_embedding_identical_for_either_twin_slot():
    params = toy_params()
    x = toy_images(2)
    e1, _ = siamese.embed_forward(params, TOY, x, want_cache=False)
    e2, _ = siamese.embed_forward(params, TOY, x, want_cache=False)
    assert np.array_equal(e1, e2)
    p = siamese.forward_pair(params, TOY, x[:1], x[1:])
    manual = siamese.sigmoid(np.abs(e1[0] - e1[1]) @ params["alpha"])
    assert p[0] == pytest.approx(manual, abs=1e-15)


def test_identical_inputs_score_half():
    params = toy_params()
    x = toy_images(1)
    p = siamese.forward_pair(params, TOY, x, x)
    assert p[0] == pytest.approx(0.5, abs=1e-12)


def test_pair_symmetry_bit_exact():
    params = toy_params()
    x = toy_images(2)
    ab = siamese.forward_pair(params, TOY, x[:1], x[1:])
    ba = siamese.forward_pair(params, TOY, x[1:], x[:1])
    assert ab[0] == ba[0]


def test_zero_alpha_scores_half_everywhere():
    params = toy_params()
    params["alpha"] = np.zeros_like(params["alpha"])
    x = toy_images(6)
    p = siamese.forward_pair(params, TOY, x[:3], x[3:])
    assert np.allclose(p, 0.5, atol=1e-15)


def test_monotone_logit_in_alpha():
    params = toy_params()
    x = toy_images(2)
    e, _ = siamese.embed_forward(params, TOY, x, want_cache=False)
    dist = np.abs(e[0] - e[1])
    assert dist.sum() > 0
    logit1 = dist @ params["alpha"]
    logit2 = dist @ (params["alpha"] + 0.1)
    assert logit2 > logit1


# ---------------------------------------------------------------------------
# loss
# ---------------------------------------------------------------------------

def test_bce_at_half_is_ln2():
    assert siamese.bce_loss(np.array([0.5]), np.array([1.0])) == pytest.approx(np.log(2))
    assert siamese.bce_loss(np.array([0.5]), np.array([0.0])) == pytest.approx(np.log(2))


def test_bce_batch_mean():
    p = np.array([0.9, 0.2])
    y = np.array([1.0, 0.0])
    l1 = siamese.bce_loss(p[:1], y[:1])
    l2 = siamese.bce_loss(p[1:], y[1:])
    assert siamese.bce_loss(p, y) == pytest.approx(0.5 * (l1 + l2))


def test_bce_clamps_extreme_probabilities():
    assert np.isfinite(siamese.bce_loss(np.array([0.0, 1.0]), np.array([1.0, 0.0])))


# ---------------------------------------------------------------------------
# gradients
# ---------------------------------------------------------------------------

def _loss_and_fingerprint(params, cfg, xa, xb, y):
    """Batch loss plus an exact fingerprint of every kink state: ReLU masks,
    pool argmax indices, the sign pattern of the embedding difference, and
    the loss-clamp mask. Two evaluations with different fingerprints straddle
    a nondifferentiable point, where central differences are not a valid
    derivative estimate."""
    import hashlib

    ha, ca = siamese.embed_forward(params, cfg, xa)
    hb, cb = siamese.embed_forward(params, cfg, xb)
    p = siamese.pair_score_from_embeddings(params, ha, hb)
    digest = hashlib.blake2b(digest_size=16)
    for cache in (ca, cb):
        for act in cache["relu"]:
            digest.update((act > 0).tobytes())
        for pool in cache["pool"]:
            if pool is not None:
                digest.update(pool[0].tobytes())
    digest.update(np.sign(ha - hb).tobytes())
    digest.update(((p > siamese.LOSS_EPS) & (p < 1 - siamese.LOSS_EPS)).tobytes())
    return siamese.bce_loss(p, y), digest.digest()


def gradcheck(params, cfg, xa, xb, y, h=1e-4, tol=1e-4, min_coverage=0.9):
    """Central-difference check of every parameter coordinate.

    Coordinates whose +-h interval provably crosses a ReLU, pooling,
    absolute-value or clamp kink (detected by fingerprint mismatch) are
    skipped: the loss is not differentiable there and finite differences
    carry no information. Everything else must match to ``tol`` relative,
    with denominator max(|numeric|, |analytic|, 1e-6). Returns per-group
    (worst relative error, checked fraction).
    """
    _, grads = siamese.loss_and_grads(params, cfg, xa, xb, y)
    report = {}
    for name in siamese.param_names(cfg):
        flat = params[name].ravel()
        ana = grads[name].ravel()
        worst, skipped = 0.0, 0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp, fp = _loss_and_fingerprint(params, cfg, xa, xb, y)
            flat[i] = orig - h
            lm, fm = _loss_and_fingerprint(params, cfg, xa, xb, y)
            flat[i] = orig
            if fp != fm:
                skipped += 1
                continue
            num = (lp - lm) / (2.0 * h)
            denom = max(abs(num), abs(ana[i]), 1e-6)
            worst = max(worst, abs(num - ana[i]) / denom)
        coverage = 1.0 - skipped / flat.size
        assert coverage >= min_coverage, (
            f"{name}: only {coverage:.1%} of coordinates are kink-free")
        assert worst <= tol, f"{name}: rel err {worst:.2e}"
        report[name] = (worst, coverage)
    return report


def gradcheck_instance(seed=3):
    """Pair batch with strong density contrast so the twin embeddings differ
    clearly; keeps almost all coordinates away from |h1-h2| kinks."""
    params = toy_params(seed=seed)
    rng = np.random.default_rng(1000 + seed)
    xa = np.stack([0.7 + 0.3 * rng.random((3, 16, 16)),
                   0.5 + 0.5 * rng.random((3, 16, 16))])
    xb = np.stack([0.3 * rng.random((3, 16, 16)),
                   0.25 * rng.random((3, 16, 16))])
    return params, xa, xb, np.array([1.0, 0.0])


def test_gradients_match_central_finite_differences():
    params, xa, xb, y = gradcheck_instance()
    report = gradcheck(params, TOY, xa, xb, y)
    assert set(report) == set(siamese.param_names(TOY))


def test_alpha_gradient_zero_for_identical_pairs():
    params = toy_params()
    x = toy_images(2)
    _, grads = siamese.loss_and_grads(params, TOY, x, x.copy(),
                                      np.array([1.0, 1.0]))
    assert np.all(grads["alpha"] == 0.0)


def test_dead_relu_unit_has_exactly_zero_gradient():
    params = toy_params()
    params["conv0_b"][0] = -100.0  # filter 0 never activates
    xa, xb = toy_images(2, seed=4), toy_images(2, seed=5)
    _, grads = siamese.loss_and_grads(params, TOY, xa, xb, np.array([1.0, 0.0]))
    assert np.all(grads["conv0_w"][0] == 0.0)
    assert grads["conv0_b"][0] == 0.0


def test_chunking_does_not_change_loss_or_grads():
    params = toy_params()
    xa, xb = toy_images(5, seed=6), toy_images(5, seed=7)
    y = np.array([1.0, 0.0, 1.0, 1.0, 0.0])
    l1, g1 = siamese.loss_and_grads(params, TOY, xa, xb, y, chunk_pairs=2)
    l2, g2 = siamese.loss_and_grads(params, TOY, xa, xb, y, chunk_pairs=5)
    assert l1 == pytest.approx(l2, rel=1e-12)
    for k in g1:
        assert np.allclose(g1[k], g2[k], atol=1e-14)


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

def test_adam_zero_gradient_keeps_parameters():
    params = toy_params()
    before = {k: v.copy() for k, v in params.items()}
    state = siamese.adam_init(params)
    zero = {k: np.zeros_like(v) for k, v in params.items()}
    siamese.adam_step(params, zero, state, lr=1e-3)
    for k in params:
        assert np.array_equal(params[k], before[k])


def test_adam_first_step_moves_by_learning_rate():
    params = {"w": np.array([1.0, -2.0, 3.0])}
    grads = {"w": np.array([0.5, -0.25, 1.0])}
    state = siamese.adam_init(params)
    siamese.adam_step(params, grads, state, lr=1e-2)
    delta = params["w"] - np.array([1.0, -2.0, 3.0])
    assert np.allclose(np.abs(delta), 1e-2, rtol=1e-6)
    assert np.array_equal(np.sign(delta), -np.sign(grads["w"]))


def test_adam_steps_are_reproducible():
    results = []
    for _ in range(2):
        params = toy_params(seed=11)
        state = siamese.adam_init(params)
        xa, xb = toy_images(3, seed=8), toy_images(3, seed=9)
        y = np.array([1.0, 0.0, 1.0])
        for _ in range(2):
            _, grads = siamese.loss_and_grads(params, TOY, xa, xb, y)
            siamese.adam_step(params, grads, state, lr=1e-3)
        results.append({k: v.copy() for k, v in params.items()})
    for k in results[0]:
        assert np.array_equal(results[0][k], results[1][k])


# ---------------------------------------------------------------------------
# training on a miniature synthetic corpus
# ---------------------------------------------------------------------------

def make_mini_corpus(root, n_classes=4, per_class=8, side=16, seed=0):
    """Tiny corpus of structured binary images, written like a real one."""
    rng = np.random.default_rng(seed)
    os.makedirs(os.path.join(root, "images"), exist_ok=True)
    records = []
    fh = {"freq_set_hz": [100e3, 200e3], "hop_rate_hops_per_s": 100.0,
          "modulation": "bpsk", "symbol_rate_hz": 1000.0, "hop_sequence_seed": 0}
    scenario = {"fh": fh, "interferences": [
        {"kind": "fixed_tone", "freqs_hz": [80e3], "amplitudes": [1.0],
         "phases_rad": [0.0]}], "jsr_db": 0.0, "noise_snr_db": None,
        "rng_seed": 0}
    lines = []
    for c in range(n_classes):
        base = np.zeros((side, side))
        base[(2 * c):(2 * c + 3)] = 1.0  # class = stripe position
        for k in range(per_class):
            noisy = np.clip(base + (rng.random((side, side)) < 0.05), 0, 1)
            chans = [ip.BinaryImage(np.roll(noisy, i, axis=1).astype(np.uint8))
                     for i in range(3)]
            comp = ip.compose(*chans)
            sid = f"c{c:02d}_j0_k{k:04d}"
            rel = f"images/{sid}.ppm"
            ip.write_ppm(os.path.join(root, rel), comp)
            split = "train" if k < per_class - 2 else "test"
            lines.append(json.dumps({
                "id": sid, "class_id": c, "jsr_db": 10.0,
                "scenario_spec": scenario,
                "files": {"composite": rel}, "split": split,
            }, sort_keys=True))
    with open(os.path.join(root, "manifest.jsonl"), "w") as f:
        f.write("\n".join(lines) + "\n")
    return dataset.load_manifest(os.path.join(root, "manifest.jsonl"))


MINI_TRAIN = siamese.TrainConfig(iterations=40, pairs_per_iteration=12,
                                 learning_rate=3e-3, seed=5, chunk_pairs=6,
                                 divergence_patience=10)


def test_train_reduces_loss_and_is_deterministic(tmp_path):
    records = make_mini_corpus(str(tmp_path))
    p1, t1 = siamese.train(TOY, MINI_TRAIN, records, str(tmp_path))
    p2, t2 = siamese.train(TOY, MINI_TRAIN, records, str(tmp_path))
    assert np.array_equal(t1, t2)
    for k in p1:
        assert np.array_equal(p1[k], p2[k])
    smooth = siamese.smooth_trace(t1, window=9)
    assert smooth[-1] < smooth[0]


def test_train_divergence_guard(tmp_path):
    records = make_mini_corpus(str(tmp_path))
    bad = siamese.TrainConfig(iterations=40, pairs_per_iteration=8,
                              learning_rate=50.0, seed=5,
                              divergence_factor=1.5, divergence_patience=3)
    with pytest.raises(DivergenceError):
        siamese.train(TOY, bad, records, str(tmp_path))


def test_train_requires_train_split(tmp_path):
    records = make_mini_corpus(str(tmp_path))
    test_only = [r for r in records if r.split == "test"]
    with pytest.raises(SamplingError):
        siamese.train(TOY, MINI_TRAIN, test_only, str(tmp_path))


# ---------------------------------------------------------------------------
# classification and evaluation
# ---------------------------------------------------------------------------

def test_classify_permutation_invariant_and_tie_break():
    params = toy_params()
    query = toy_images(1)[0]
    support = {c: toy_images(3, seed=20 + c) for c in range(4)}
    best, scores = siamese.classify(params, TOY, query, support)
    support_rev = {c: support[c] for c in reversed(sorted(support))}
    best2, scores2 = siamese.classify(params, TOY, query, support_rev)
    assert best == best2 and scores == scores2

    params["alpha"] = np.zeros_like(params["alpha"])  # all scores 0.5
    best, scores = siamese.classify(params, TOY, query, support)
    assert best == 0  # tie broken toward the lowest class id
    assert all(s == pytest.approx(0.5) for s in scores.values())


def test_classify_requires_full_support_coverage():
    params = toy_params()
    support = {0: toy_images(2), 1: toy_images(2)}
    with pytest.raises(ConfigurationError):
        siamese.classify(params, TOY, toy_images(1)[0], support,
                         expected_classes=range(3))


def test_classify_recovers_exemplar_class(tmp_path):
    records = make_mini_corpus(str(tmp_path))
    params, _ = siamese.train(TOY, MINI_TRAIN, records, str(tmp_path))
    support = siamese.draw_support(records, str(tmp_path), k=3, seed=1)
    exemplar = support[2][0]
    best, scores = siamese.classify(params, TOY, exemplar, support)
    if scores[2] > max(v for c, v in scores.items() if c != 2):
        assert best == 2


def test_evaluate_report_structure(tmp_path):
    records = make_mini_corpus(str(tmp_path))
    params = toy_params()
    report = siamese.evaluate(params, TOY, records, str(tmp_path),
                              k_support=3, n_draws=2, seed=3)
    assert report["n_queries"] == 8
    assert set(report["per_jsr_accuracy"]) == {10.0}
    conf = np.array(report["confusion"])
    assert conf.sum() == report["n_queries"] * report["n_draws"]
    assert 0.0 <= report["overall_accuracy"] <= 1.0


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def test_checkpoint_round_trip(tmp_path):
    params = toy_params()
    state = siamese.adam_init(params)
    state.t = 17
    path = str(tmp_path / "model.ckpt")
    siamese.save_checkpoint(path, params, TOY, step=17, state=state)
    params2, cfg2, step, state2 = siamese.load_checkpoint(path)
    assert cfg2 == TOY and step == 17
    for k in params:
        assert np.array_equal(params[k], params2[k])
    assert state2 is not None and state2.t == 17


def test_checkpoint_rejects_foreign_files(tmp_path):
    path = str(tmp_path / "junk.ckpt")
    with open(path, "wb") as f:
        f.write(b"not a checkpoint")
    with pytest.raises(ConfigurationError):
        siamese.load_checkpoint(path)
