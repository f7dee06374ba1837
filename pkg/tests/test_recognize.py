import numpy as np
import pytest
from hypothesis import given, strategies as st

from vocseg.localize import LocalizedObject
from vocseg.prompts import Category, Vocabulary
from vocseg.recognize import (EmbeddingBatch, MatchConfig, Prediction, REJECTED,
                              embed_objects, joint_svd_project, match,
                              match_objects, softmax)
from vocseg.text_embed import l2_normalize_rows


def unit_rows(rng, m, d):
    return l2_normalize_rows(rng.standard_normal((m, d)).astype(np.float32))


# --------------------------------------------------------------------- softmax

def test_softmax_reproduces_published_example():
    probs = softmax(np.array([1.3, 5.1, 2.2, 0.7, 1.1]))
    expected = np.array([0.02, 0.90, 0.05, 0.01, 0.02])
    assert np.abs(probs - expected).max() <= 0.01
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_softmax_symmetric_pair():
    for c in (-100.0, 0.0, 3.7, 1e6):
        assert np.allclose(softmax(np.array([c, c])), [0.5, 0.5])


def test_softmax_closed_form():
    probs = softmax(np.array([0.0, np.log(2.0)]))
    assert np.abs(probs - [1 / 3, 2 / 3]).max() <= 1e-9


def test_softmax_empty_rejected():
    with pytest.raises(ValueError):
        softmax(np.array([]))


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=8),
       st.floats(-20, 20))
def test_softmax_shift_invariance(scores, shift):
    a = softmax(np.array(scores))
    b = softmax(np.array(scores) + shift)
    assert np.abs(a - b).max() <= 1e-12


# ----------------------------------------------------------------- projection

def test_full_rank_projection_preserves_cosines():
    rng = np.random.default_rng(0)
    batch = EmbeddingBatch(image_rows=unit_rows(rng, 6, 32),
                           text_rows=unit_rows(rng, 5, 32),
                           category_names=[f"c{i}" for i in range(5)])
    before = batch.image_rows @ batch.text_rows.T
    out = joint_svd_project(batch, k=11)  # 11 rows -> full rank
    after = out.image_rows @ out.text_rows.T
    assert np.abs(before - after).max() <= 1e-6


def test_projected_rows_are_renormalized():
    rng = np.random.default_rng(1)
    batch = EmbeddingBatch(image_rows=unit_rows(rng, 4, 16),
                           text_rows=unit_rows(rng, 3, 16),
                           category_names=["a", "b", "c"])
    out = joint_svd_project(batch, k=2)
    assert np.abs(np.linalg.norm(out.image_rows, axis=1) - 1).max() <= 1e-6
    assert np.abs(np.linalg.norm(out.text_rows, axis=1) - 1).max() <= 1e-6


def test_rank2_toy_matches_gram_oracle():
    # three rows spanning two directions in 4-d space
    e1 = np.array([1.0, 0, 0, 0])
    e2 = np.array([0, 1.0, 0, 0])
    rows = np.stack([e1, (e1 + e2) / np.sqrt(2), e2]).astype(np.float32)
    batch = EmbeddingBatch(image_rows=rows[2:], text_rows=rows[:2],
                           category_names=["a", "b"])
    out = joint_svd_project(batch, k=2)
    # rank-2 data: projection is an isometry, cosines equal the raw Gram values
    ref = rows[2:] @ rows[:2].T
    got = out.image_rows @ out.text_rows.T
    assert np.abs(ref - got).max() <= 1e-6


def test_auto_k_is_category_count_when_small():
    cfg = MatchConfig(use_svd=True)
    assert cfg.resolve_k(num_rows=21, dim=512) == 21
    assert cfg.resolve_k(num_rows=257, dim=512) == 512


def test_explicit_k_validated():
    with pytest.raises(ValueError):
        MatchConfig(k_latent=0).resolve_k(3, 512)
    with pytest.raises(ValueError):
        joint_svd_project(EmbeddingBatch(np.zeros((1, 8), dtype=np.float32),
                                         np.zeros((2, 8), dtype=np.float32), ["a", "b"]),
                          k=9)


def test_per_modality_fit_runs_and_renormalizes():
    rng = np.random.default_rng(2)
    batch = EmbeddingBatch(image_rows=unit_rows(rng, 5, 16),
                           text_rows=unit_rows(rng, 4, 16),
                           category_names=list("abcd"))
    out = joint_svd_project(batch, k=3, fit="per-modality")
    assert out.image_rows.shape == (5, 3)
    assert out.text_rows.shape == (4, 3)
    assert np.abs(np.linalg.norm(out.text_rows, axis=1) - 1).max() <= 1e-6


# -------------------------------------------------------------------- matching

def names(n):
    return [f"cat{i}" for i in range(n)]


def test_self_match_dominates():
    rng = np.random.default_rng(3)
    text = unit_rows(rng, 4, 64)
    batch = EmbeddingBatch(image_rows=text[2:3].copy(), text_rows=text,
                           category_names=names(4))
    preds = match(batch, MatchConfig(theta=0.3, logit_scale=100.0))
    assert preds[0].label == "cat2"
    assert preds[0].max_prob > 0.99


def test_uniform_similarity_rejected():
    text = np.tile(np.eye(1, 512, dtype=np.float32), (81, 1))  # 81 identical rows
    image = np.eye(1, 512, dtype=np.float32)
    batch = EmbeddingBatch(image_rows=image, text_rows=text, category_names=names(81))
    preds = match(batch, MatchConfig(theta=0.3, logit_scale=100.0))
    assert preds[0].label == REJECTED
    assert preds[0].max_prob == pytest.approx(1 / 81, abs=1e-9)


def test_two_class_scaled_probabilities():
    # cosines 0.30 / 0.25 at scale 100 -> e^5 / (1 + e^5)
    image = np.array([[1.0, 0.0]], dtype=np.float32)
    text = np.array([[0.30, np.sqrt(1 - 0.30 ** 2)],
                     [0.25, np.sqrt(1 - 0.25 ** 2)]], dtype=np.float32)
    batch = EmbeddingBatch(image_rows=image, text_rows=text, category_names=names(2))
    preds = match(batch, MatchConfig(theta=0.3, logit_scale=100.0))
    e5 = np.exp(5.0)
    assert preds[0].probs[0] == pytest.approx(e5 / (1 + e5), abs=1e-4)
    assert preds[0].probs[1] == pytest.approx(1 / (1 + e5), abs=1e-4)
    assert preds[0].label == "cat0"


def test_argmax_invariant_under_logit_scale():
    rng = np.random.default_rng(4)
    image = unit_rows(rng, 5, 32)
    text = unit_rows(rng, 7, 32)
    batch = EmbeddingBatch(image_rows=image, text_rows=text, category_names=names(7))
    base = [np.argmax(p.probs) for p in match(batch, MatchConfig(theta=0.0, logit_scale=1.0))]
    for scale in (5.0, 55.0, 100.0):
        labels = [np.argmax(p.probs)
                  for p in match(batch, MatchConfig(theta=0.0, logit_scale=scale))]
        assert labels == base


def test_probs_sum_to_one_and_match_recomputation():
    rng = np.random.default_rng(5)
    batch = EmbeddingBatch(image_rows=unit_rows(rng, 3, 16),
                           text_rows=unit_rows(rng, 4, 16),
                           category_names=names(4))
    cfg = MatchConfig(theta=0.0, logit_scale=37.0)
    for pred in match(batch, cfg):
        assert pred.probs.sum() == pytest.approx(1.0, abs=1e-9)
    cosines = batch.image_rows @ batch.text_rows.T
    again = softmax(cfg.logit_scale * cosines)
    for pred, probs in zip(match(batch, cfg), again):
        assert np.allclose(pred.probs, probs, atol=1e-12)


def test_open_set_row_wins_like_any_class():
    rng = np.random.default_rng(6)
    vocab = Vocabulary(categories=[Category("cat"), Category("dog")])
    text = unit_rows(rng, 3, 32)  # last row is the open-set entry
    image = text[2:3].copy()
    preds = match_objects(image, text, vocab, MatchConfig(theta=0.3, logit_scale=100.0))
    assert preds[0].label == "something else"


def test_dimension_mismatch_rejected():
    batch = EmbeddingBatch(image_rows=np.zeros((1, 8), dtype=np.float32),
                           text_rows=np.zeros((2, 16), dtype=np.float32),
                           category_names=["a", "b"])
    with pytest.raises(ValueError):
        match(batch, MatchConfig())


def test_empty_objects_empty_predictions(bundle):
    rows = embed_objects(bundle.image_encoder, [])
    assert rows.shape == (0, 512)
    batch = EmbeddingBatch(image_rows=rows,
                           text_rows=np.eye(2, 512, dtype=np.float32),
                           category_names=["a", "b"])
    assert match(batch, MatchConfig()) == []


def test_embed_objects_normalized_and_deterministic(bundle):
    rng = np.random.default_rng(7)
    crop = rng.integers(0, 255, (50, 40, 3), dtype=np.uint8)
    obj = LocalizedObject(bbox=(0, 0, 39, 49), area=100, cluster_id=0,
                          crop=crop, component_mask=np.ones((50, 40), dtype=bool))
    rows = embed_objects(bundle.image_encoder, [obj, obj])
    assert rows.shape == (2, 512)
    assert np.abs(np.linalg.norm(rows, axis=1) - 1).max() <= 1e-6
    assert np.array_equal(rows[0], rows[1])
