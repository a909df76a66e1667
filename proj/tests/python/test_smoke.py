"""Smoke tests for the python bindings."""

import math

import numpy as np
import pytest

import ccfrec


def test_kmeans_recovers_blob_means():
    rng = np.random.default_rng(0)
    a = rng.normal((5, 5), 0.05, size=(40, 2))
    b = rng.normal((-5, -5), 0.05, size=(40, 2))
    pts = np.vstack([a, b])
    res = ccfrec.fit_kmeans(pts, 2, seed=3)
    got = sorted(res.centroids.tolist())
    assert np.allclose(got[0], b.mean(axis=0), atol=1e-3)
    assert np.allclose(got[1], a.mean(axis=0), atol=1e-3)
    assert res.objective_trace == sorted(res.objective_trace, reverse=True)


def test_pq_assignment_matches_bruteforce():
    rng = np.random.default_rng(1)
    vecs = rng.normal(size=(32, 8))
    view = ccfrec.fit_pq(vecs, k=2, C=4, seed=9)
    for row in vecs:
        codes = ccfrec.assign_view_codes(row, view, "pq")
        for j, level in enumerate(view.levels):
            sub = row[j * 4:(j + 1) * 4]
            expected = int(np.argmin(((level - sub) ** 2).sum(axis=1)))
            assert codes[j] == expected
        recon = ccfrec.reconstruct_view(codes, view, "pq")
        assert recon.shape == (8,)


def test_pca_projection():
    rng = np.random.default_rng(2)
    data = rng.normal(size=(50, 6))
    pca = ccfrec.fit_pca(data, 3)
    gram = pca.components.T @ pca.components
    assert np.abs(gram - np.eye(3)).max() < 1e-8
    z = ccfrec.project(data, pca)
    expected = (data - pca.mean) @ pca.components
    assert np.allclose(z, expected)


def test_hash_encoder_determinism():
    enc = ccfrec.HashingTextEncoder(16, seed=5)
    assert np.array_equal(enc.encode("drum kit"), enc.encode("drum kit"))
    assert not np.array_equal(enc.encode("drum kit"), enc.encode("bass amp"))


def test_mask_codes():
    codes = [1, 2, 3, 0, 1, 2, 3, 0]
    masked, mask_set = ccfrec.mask_codes(codes, rho=0.5, C=4, seed=11)
    assert len(mask_set) == 4
    again, again_set = ccfrec.mask_codes(codes, rho=0.5, C=4, seed=11)
    assert masked == again and mask_set == again_set


def test_loss_ce_against_numpy():
    rng = np.random.default_rng(3)
    user = rng.normal(size=(1, 8))
    cands = rng.normal(size=(5, 8))
    tau = 0.07
    cos = (cands @ user.T).ravel() / (
        np.linalg.norm(cands, axis=1) * np.linalg.norm(user))
    logits = cos / tau
    expected = math.log(np.exp(logits - logits.max()).sum()) + logits.max() - logits[2]
    got = ccfrec.loss_ce(user, cands, target=2, tau=tau)
    assert abs(got - expected) < 1e-10


def test_metrics_closed_forms():
    assert ccfrec.recall_from_ranks([1, 7, 12], 10) == pytest.approx(2 / 3)
    assert ccfrec.ndcg_from_ranks([2], 10) == pytest.approx(1 / math.log2(3))
    order = ccfrec.rank_full(np.array([1.0, 0.0]), np.eye(2), set())
    assert order == [0, 1]


def test_synthetic_corpus_shape():
    items, interactions = ccfrec.generate_synthetic(
        topics=3, items_per_topic=5, users=20, mean_len=5.0, p_stay=0.9, seed=4)
    assert len(items) == 15
    assert {"item_id", "title", "brand"} <= set(items[0].keys())
    assert all(len(r) == 3 for r in interactions)


def test_pipeline_end_to_end(tmp_path):
    cfg = {
        "seed": 17, "synth.topics": 3, "synth.items_per_topic": 6, "synth.users": 50,
        "synth.mean_len": 6, "corpus.k_core": 2, "enc.d_e": 16, "model.d": 8,
        "model.sfm_layers": 1, "model.backbone_layers": 1, "model.ffn": 16,
        "quant.k": 2, "quant.C": 4, "train.batch": 32, "train.max_epochs": 1,
    }
    wd = tmp_path / "work"
    for stage in ("synth", "ingest", "embed", "quantize", "train"):
        status = ccfrec.run_pipeline(stage, wd, cfg)
        assert not status["skipped"], stage
    # rerun skips
    assert ccfrec.run_pipeline("embed", wd, cfg)["skipped"]

    report = ccfrec.run_eval(wd, "test", cfg)
    assert report["users"] > 0
    assert 0.0 <= report["recall10"] <= 1.0
    assert report["ndcg10"] <= report["recall10"] + 1e-12
    # deterministic on rerun
    assert ccfrec.run_eval(wd, "test", cfg) == report


def test_pipeline_missing_prerequisite(tmp_path):
    with pytest.raises(ccfrec.CcfrecError):
        ccfrec.run_pipeline("quantize", tmp_path / "empty", {})
