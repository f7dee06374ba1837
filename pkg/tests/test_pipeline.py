import json

import numpy as np
import pytest

from vocseg.datasets import load_canonical
from vocseg.pipeline import (PipelineConfig, evaluate_dataset, load_bundle,
                             load_image, predictions_payload, recognize_image,
                             report_mean_csv, report_to_json, segment_image,
                             spectrum_payload)
from vocseg.prompts import Vocabulary
from vocseg.recognize import REJECTED


@pytest.fixture(scope="module")
def canon(data_dir):
    return load_canonical(data_dir / "canonical_10")


@pytest.fixture(scope="module")
def image_480(data_dir):
    return load_image(data_dir / "images/img_480x640.png")


def small_ds(canon, n=3):
    import copy
    ds = copy.copy(canon)
    ds.samples = canon.samples[:n]
    return ds


def test_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(mode="BAD")
    with pytest.raises(ValueError):
        PipelineConfig(theta=1.5)
    with pytest.raises(ValueError):
        PipelineConfig(template="PhraseX")
    with pytest.raises(ValueError):
        PipelineConfig(workers=0)


def test_config_hash_ignores_worker_count_and_verbosity():
    a = PipelineConfig(workers=1, verbose=False)
    b = PipelineConfig(workers=8, verbose=True)
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != PipelineConfig(theta=0.5).config_hash()


def test_segment_grids_by_mode(bundle, image_480):
    out2 = segment_image(bundle, image_480, PipelineConfig(mode="OVSRI2"))
    assert out2.latent.grid_shape == (64, 86)
    assert out2.seg.labels_full.shape == (480, 640)
    out1 = segment_image(bundle, image_480, PipelineConfig(mode="OVSRI"))
    assert out1.latent.grid_shape == (15, 20)
    # masks partition the image in both modes
    for out in (out1, out2):
        assert (out.seg.masks.sum(axis=0) == 1).all()


def test_segment_k_override(bundle, image_480):
    out = segment_image(bundle, image_480, PipelineConfig(mode="OVSRI", k_clusters=4))
    assert out.seg.k == 4


def test_recognize_payload_schema(bundle, canon):
    sample = canon.samples[0]
    image = load_image(sample.image_path)
    cfg = PipelineConfig(mode="OVSRI")
    out = recognize_image(bundle, image, canon.vocabulary, cfg)
    payload = predictions_payload(out.predictions, cfg, sample.image_id)
    assert payload["mode"] == "OVSRI"
    assert payload["template"] == "Phrase3"
    assert payload["use_svd"] is False
    valid = set(canon.vocabulary.names) | {REJECTED}
    for obj in payload["objects"]:
        assert obj["label"] in valid
        assert len(obj["bbox"]) == 4
        assert "probs" not in obj  # verbose off


def test_recognize_verbose_includes_probs(bundle, canon):
    sample = canon.samples[0]
    image = load_image(sample.image_path)
    cfg = PipelineConfig(mode="OVSRI", verbose=True)
    out = recognize_image(bundle, image, canon.vocabulary, cfg)
    payload = predictions_payload(out.predictions, cfg, sample.image_id)
    for obj in payload["objects"]:
        assert len(obj["probs"]) == len(canon.vocabulary.names)


def test_svd_toggle_changes_probs_not_schema(bundle, canon):
    sample = canon.samples[1]
    image = load_image(sample.image_path)
    base = PipelineConfig(mode="OVSRI", use_svd=False)
    with_svd = PipelineConfig(mode="OVSRI", use_svd=True)
    a = recognize_image(bundle, image, canon.vocabulary, base)
    b = recognize_image(bundle, image, canon.vocabulary, with_svd)
    assert len(a.predictions) == len(b.predictions)
    for pa, pb in zip(a.predictions, b.predictions):
        assert pa.bbox == pb.bbox
        assert pa.probs.shape == pb.probs.shape
    # both runs are individually deterministic
    a2 = recognize_image(bundle, image, canon.vocabulary, base)
    for pa, pa2 in zip(a.predictions, a2.predictions):
        assert np.array_equal(pa.probs, pa2.probs)


def test_spectrum_payload_fields(bundle, image_480):
    cfg = PipelineConfig(mode="OVSRI2")
    out = segment_image(bundle, image_480, cfg)
    payload = spectrum_payload(out, cfg, "x")
    assert payload["grid"] == [64, 86]
    assert len(payload["sigma"]) >= len(payload["d2"]) + 2
    assert payload["k"] == out.seg.k
    assert payload["config_hash"] == cfg.config_hash()


def test_evaluate_structure_and_determinism(bundle, canon):
    ds = small_ds(canon, 3)
    cfg = PipelineConfig(mode="OVSRI")
    a = evaluate_dataset(bundle, ds, cfg)
    assert a["num_images"] == 3
    assert a["num_failed"] == 0
    assert [r["id"] for r in a["images"]] == sorted(r["id"] for r in a["images"])
    assert set(a["mean"]) >= {"hiou", "precision", "recall", "f1", "ap", "accuracy"}
    for rec in a["images"]:
        assert 0.0 <= rec["hiou"] <= 1.0
    b = evaluate_dataset(bundle, ds, cfg)
    assert report_to_json(a) == report_to_json(b)


def test_evaluate_parallel_equals_serial(bundle, canon):
    ds = small_ds(canon, 4)
    serial = evaluate_dataset(bundle, ds, PipelineConfig(mode="OVSRI", workers=1))
    parallel = evaluate_dataset(bundle, ds, PipelineConfig(mode="OVSRI", workers=4))
    assert report_to_json(serial) == report_to_json(parallel)


def test_evaluate_records_per_image_failures(bundle, canon, tmp_path, data_dir):
    import shutil
    shutil.copytree(data_dir / "canonical_10", tmp_path / "ds")
    (tmp_path / "ds/images/canon001.png").write_bytes(b"corrupt")
    ds = load_canonical(tmp_path / "ds")
    ds.samples = ds.samples[:3]
    report = evaluate_dataset(bundle, ds, PipelineConfig(mode="OVSRI"))
    assert report["num_failed"] == 1
    failed = [r for r in report["images"] if "error" in r]
    assert failed[0]["id"] == "canon001"
    assert report["mean"]["hiou"] >= 0.0  # means computed over the healthy images


def test_csv_export_shape(bundle, canon):
    ds = small_ds(canon, 2)
    report = evaluate_dataset(bundle, ds, PipelineConfig(mode="OVSRI"))
    csv = report_mean_csv(report)
    lines = csv.strip().splitlines()
    assert lines[0] == "metric,value"
    assert any(line.startswith("hiou,") for line in lines)


def test_load_bundle_missing_dir(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_bundle(tmp_path / "nope")
