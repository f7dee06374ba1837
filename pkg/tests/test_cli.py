import json

import pytest
from click.testing import CliRunner

from vocseg.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


def invoke(runner, models_dir, args):
    return runner.invoke(main, args + ["--model-dir", str(models_dir)],
                         catch_exceptions=False)


def test_segment_writes_artifacts(runner, models_dir, data_dir, tmp_path):
    result = invoke(runner, models_dir, [
        "segment", str(data_dir / "images/img_480x640.png"),
        "--out", str(tmp_path), "--mode", "OVSRI2"])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "img_480x640.labels.png").exists()
    assert (tmp_path / "img_480x640.mask0.png").exists()
    spectrum = json.loads((tmp_path / "img_480x640.spectrum.json").read_text())
    assert spectrum["grid"] == [64, 86]
    assert "k" in spectrum and "sigma" in spectrum


def test_segment_directory_input(runner, models_dir, data_dir, tmp_path):
    result = invoke(runner, models_dir, [
        "segment", str(data_dir / "voc_mini/JPEGImages"),
        "--out", str(tmp_path), "--mode", "OVSRI"])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "voc_000.spectrum.json").exists()
    assert (tmp_path / "voc_002.spectrum.json").exists()


def test_recognize_writes_predictions(runner, models_dir, data_dir, tmp_path):
    result = invoke(runner, models_dir, [
        "recognize", str(data_dir / "canonical_10/images/canon000.png"),
        "--vocab", str(data_dir / "vocab/canonical6.json"),
        "--out", str(tmp_path), "--mode", "OVSRI", "--theta", "0.2", "--dump-crops"])
    assert result.exit_code == 0, result.output
    payload = json.loads((tmp_path / "canon000.predictions.json").read_text())
    assert payload["theta"] == 0.2
    assert (tmp_path / "canon000.overlay.png").exists()
    crops = list(tmp_path.glob("canon000.obj*.png"))
    assert len(crops) == len(payload["objects"])


def test_recognize_same_invocation_identical_bytes(runner, models_dir, data_dir, tmp_path):
    args = ["recognize", str(data_dir / "canonical_10/images/canon002.png"),
            "--vocab", str(data_dir / "vocab/canonical6.json"), "--mode", "OVSRI"]
    invoke(runner, models_dir, args + ["--out", str(tmp_path / "a")])
    invoke(runner, models_dir, args + ["--out", str(tmp_path / "b")])
    a = (tmp_path / "a/canon002.predictions.json").read_bytes()
    b = (tmp_path / "b/canon002.predictions.json").read_bytes()
    assert a == b


def test_evaluate_writes_report_and_csv(runner, models_dir, data_dir, tmp_path):
    out = tmp_path / "report.json"
    result = invoke(runner, models_dir, [
        "evaluate", "--dataset-kind", "canonical",
        "--root", str(data_dir / "canonical_10"), "--limit", "2",
        "--out", str(out), "--csv", "--mode", "OVSRI"])
    assert result.exit_code == 0, result.output
    report = json.loads(out.read_text())
    assert report["num_images"] == 2
    assert report["schema_version"] == 1
    csv = (tmp_path / "report.csv").read_text().splitlines()
    assert csv[0] == "metric,value"


def test_evaluate_reports_are_byte_identical(runner, models_dir, data_dir, tmp_path):
    base = ["evaluate", "--dataset-kind", "canonical",
            "--root", str(data_dir / "canonical_10"), "--limit", "2", "--mode", "OVSRI"]
    invoke(runner, models_dir, base + ["--out", str(tmp_path / "r1.json")])
    invoke(runner, models_dir, base + ["--out", str(tmp_path / "r2.json")])
    invoke(runner, models_dir, base + ["--out", str(tmp_path / "r4.json"), "--workers", "4"])
    r1 = (tmp_path / "r1.json").read_bytes()
    assert r1 == (tmp_path / "r2.json").read_bytes()
    assert r1 == (tmp_path / "r4.json").read_bytes()


def test_evaluate_template_ablation(runner, models_dir, data_dir, tmp_path):
    result = invoke(runner, models_dir, [
        "evaluate", "--dataset-kind", "canonical",
        "--root", str(data_dir / "canonical_10"), "--limit", "1",
        "--out", str(tmp_path / "r.json"), "--ablate-template", "--mode", "OVSRI"])
    assert result.exit_code == 0, result.output
    for phrase in ("Phrase1", "Phrase2", "Phrase3"):
        report = json.loads((tmp_path / f"r.{phrase}.json").read_text())
        assert report["config"]["template"] == phrase


def test_config_file_and_cli_precedence(runner, models_dir, data_dir, tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("mode: OVSRI\ntheta: 0.7\n")
    result = invoke(runner, models_dir, [
        "recognize", str(data_dir / "canonical_10/images/canon000.png"),
        "--vocab", str(data_dir / "vocab/canonical6.json"),
        "--out", str(tmp_path), "--config", str(cfg), "--theta", "0.4"])
    assert result.exit_code == 0, result.output
    payload = json.loads((tmp_path / "canon000.predictions.json").read_text())
    assert payload["mode"] == "OVSRI"   # from file
    assert payload["theta"] == 0.4      # CLI wins


def test_config_file_unknown_key_rejected(runner, models_dir, tmp_path, data_dir):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("not_a_key: 1\n")
    result = runner.invoke(main, [
        "segment", str(data_dir / "images/img_224x224.png"),
        "--out", str(tmp_path), "--config", str(cfg),
        "--model-dir", str(models_dir)])
    assert result.exit_code != 0
    assert "unknown config keys" in result.output


def test_embed_text_writes_matrix(runner, models_dir, data_dir, tmp_path):
    out = tmp_path / "voc.emb"
    result = invoke(runner, models_dir, [
        "embed-text", "--vocab", str(data_dir / "vocab/voc20.json"),
        "--out", str(out)])
    assert result.exit_code == 0, result.output
    from vocseg.text_embed import read_embedding_file
    rows, header = read_embedding_file(out)
    assert rows.shape == (21, 512)
    assert header["shape"] == [21, 512]


def test_convert_dataset(runner, models_dir, data_dir, tmp_path):
    result = invoke(runner, models_dir, [
        "convert-dataset", "--dataset-kind", "voc",
        "--images", str(data_dir / "voc_mini/JPEGImages"),
        "--segmentations", str(data_dir / "voc_mini/SegmentationClass"),
        "--dst", str(tmp_path / "canon")])
    assert result.exit_code == 0, result.output
    manifest = json.loads((tmp_path / "canon/dataset.json").read_text())
    assert len(manifest["images"]) == 3


def test_missing_model_dir_fails_before_inference(runner, tmp_path, data_dir):
    result = CliRunner().invoke(main, [
        "segment", str(data_dir / "images/img_224x224.png"),
        "--out", str(tmp_path), "--model-dir", str(tmp_path / "nope")])
    assert result.exit_code != 0
    assert "failed" in result.output or "not found" in result.output
