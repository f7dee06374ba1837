"""Command-line client for the vocseg service.

Talks HTTP to a running server (--server / VOCSEG_SERVER); without one it
mounts the service in-process, so every subcommand also works standalone.
Artifacts are written client-side from the response payloads.
"""

from __future__ import annotations

import base64
import json
import logging
import sys
from pathlib import Path

import click
import httpx
import yaml

SCHEMA_KEYS = ("mode", "template", "use_svd", "svd_fit", "theta", "k_latent",
               "k_clusters", "linkage", "opening_se", "dilation_se",
               "min_area_fraction", "min_area_px", "merge_per_class",
               "logit_scale", "workers", "verbose")


class ApiClient:
    def __init__(self, server: str | None, model_dir: str | None):
        if server:
            self._client = httpx.Client(base_url=server, timeout=600.0)
        else:
            from fastapi.testclient import TestClient

            from .service import create_app
            self._client = TestClient(create_app(model_dir))

    def post(self, path: str, payload: dict) -> dict:
        resp = self._client.post(path, json=payload)
        if resp.status_code >= 400:
            try:
                detail = resp.json().get("detail", resp.text)
            except Exception:
                detail = resp.text
            raise click.ClickException(f"{path} failed ({resp.status_code}): {detail}")
        return resp.json()

    def get(self, path: str) -> dict:
        resp = self._client.get(path)
        resp.raise_for_status()
        return resp.json()


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    data = yaml.safe_load(Path(path).read_text()) or {}
    unknown = set(data) - set(SCHEMA_KEYS)
    if unknown:
        raise click.ClickException(f"unknown config keys in {path}: {sorted(unknown)}")
    return data


def _merge_config(file_cfg: dict, cli_cfg: dict) -> dict:
    merged = dict(file_cfg)
    merged.update({k: v for k, v in cli_cfg.items() if v is not None})
    return merged


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_png(path: Path, b64: str) -> None:
    path.write_bytes(base64.b64decode(b64))


def common_options(f):
    f = click.option("--server", envvar="VOCSEG_SERVER", default=None,
                     help="Service base URL; omit to run in-process.")(f)
    f = click.option("--model-dir", envvar="VOCSEG_MODEL_DIR", default=None,
                     help="Directory with exported models (in-process mode).")(f)
    f = click.option("--config", "config_file", type=click.Path(exists=True),
                     default=None, help="YAML config file (CLI flags win).")(f)
    return f


def pipeline_options(f):
    f = click.option("--mode", type=click.Choice(["OVSRI", "OVSRI2"]), default=None)(f)
    f = click.option("--template", type=click.Choice(["Phrase1", "Phrase2", "Phrase3"]),
                     default=None)(f)
    f = click.option("--svd/--no-svd", "use_svd", default=None,
                     help="Project embeddings into a shared SVD space.")(f)
    f = click.option("--svd-fit", type=click.Choice(["joint", "per-modality"]),
                     default=None)(f)
    f = click.option("--theta", type=float, default=None,
                     help="Probability threshold for rejection.")(f)
    f = click.option("--min-area", "min_area_fraction", type=float, default=None,
                     help="Minimum region area as a fraction of image pixels.")(f)
    f = click.option("--workers", type=int, default=None)(f)
    f = click.option("--verbose", is_flag=True, default=None)(f)
    return f


@click.group()
def main():
    """Open-vocabulary segmentation and recognition."""
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--model-dir", envvar="VOCSEG_MODEL_DIR", required=True)
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8008, type=int)
def serve(model_dir, host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app
    uvicorn.run(create_app(model_dir), host=host, port=port)


@main.command()
@click.argument("images", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=".", help="Artifact directory.")
@click.option("--latent-maps", is_flag=True, help="Also dump latent feature maps.")
@common_options
@pipeline_options
def segment(images, out, latent_maps, server, model_dir, config_file, **cli_cfg):
    """Segment images; writes label PNG, cluster masks and spectrum JSON."""
    client = ApiClient(server, model_dir)
    cfg = _merge_config(_load_config_file(config_file), cli_cfg)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for image in _expand_images(images):
        resp = client.post("/v1/segment", {
            "image_path": str(Path(image).resolve()),
            "config": cfg,
            "include_masks": True,
            "include_latent_maps": latent_maps,
        })
        stem = out_dir / Path(image).stem
        _write_png(Path(f"{stem}.labels.png"), resp["labels_png_b64"])
        for c, mask_b64 in enumerate(resp["masks_png_b64"]):
            _write_png(Path(f"{stem}.mask{c}.png"), mask_b64)
        for i, map_b64 in enumerate(resp.get("latent_maps_png_b64", [])):
            _write_png(Path(f"{stem}.latent{i}.png"), map_b64)
        _write_json(Path(f"{stem}.spectrum.json"), resp["spectrum"])
        click.echo(f"{image}: grid={resp['grid'][0]}x{resp['grid'][1]} k={resp['k']}")


@main.command()
@click.argument("images", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--vocab", "vocab_path", required=True, type=click.Path(exists=True),
              help="Vocabulary JSON file.")
@click.option("--out", type=click.Path(), default=".", help="Artifact directory.")
@click.option("--dump-crops", is_flag=True, help="Also write per-object crops.")
@common_options
@pipeline_options
def recognize(images, vocab_path, out, dump_crops, server, model_dir, config_file,
              **cli_cfg):
    """Recognize objects; writes predictions JSON and an annotated overlay."""
    client = ApiClient(server, model_dir)
    cfg = _merge_config(_load_config_file(config_file), cli_cfg)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for image in _expand_images(images):
        resp = client.post("/v1/recognize", {
            "image_path": str(Path(image).resolve()),
            "vocab_path": str(Path(vocab_path).resolve()),
            "config": cfg,
            "include_overlay": True,
            "include_crops": dump_crops,
        })
        stem = out_dir / Path(image).stem
        _write_json(Path(f"{stem}.predictions.json"), resp["predictions"])
        if resp.get("overlay_png_b64"):
            _write_png(Path(f"{stem}.overlay.png"), resp["overlay_png_b64"])
        for i, crop_b64 in enumerate(resp.get("crops_png_b64", [])):
            _write_png(Path(f"{stem}.obj{i}.png"), crop_b64)
        labels = [o["label"] for o in resp["predictions"]["objects"]]
        click.echo(f"{image}: {len(labels)} objects -> {labels}")


def _dataset_payload(kind, annotations, image_dir, seg_dir, root, limit) -> dict:
    spec = {"kind": kind, "limit": limit}
    if annotations:
        spec["annotation_json"] = str(Path(annotations).resolve())
    if image_dir:
        spec["image_dir"] = str(Path(image_dir).resolve())
    if seg_dir:
        spec["seg_dir"] = str(Path(seg_dir).resolve())
    if root:
        spec["root"] = str(Path(root).resolve())
    return spec


def dataset_options(f):
    f = click.option("--dataset-kind", "kind",
                     type=click.Choice(["coco", "voc", "canonical"]), required=True)(f)
    f = click.option("--annotations", type=click.Path(exists=True), default=None,
                     help="COCO instances JSON.")(f)
    f = click.option("--images", "image_dir", type=click.Path(exists=True), default=None)(f)
    f = click.option("--segmentations", "seg_dir", type=click.Path(exists=True),
                     default=None, help="VOC SegmentationClass directory.")(f)
    f = click.option("--root", type=click.Path(exists=True), default=None,
                     help="Canonical dataset root.")(f)
    f = click.option("--limit", type=int, default=None)(f)
    return f


@main.command()
@dataset_options
@click.option("--out", type=click.Path(), default="report.json")
@click.option("--csv", "csv_out", is_flag=True, help="Also write the mean block as CSV.")
@click.option("--ablate-template", is_flag=True,
              help="Write one report per prompt template.")
@common_options
@pipeline_options
def evaluate(kind, annotations, image_dir, seg_dir, root, limit, out, csv_out,
             ablate_template, server, model_dir, config_file, **cli_cfg):
    """Evaluate a dataset; writes an EvalReport JSON (and optional CSV)."""
    from .pipeline import report_mean_csv, report_to_json

    client = ApiClient(server, model_dir)
    cfg = _merge_config(_load_config_file(config_file), cli_cfg)
    dataset = _dataset_payload(kind, annotations, image_dir, seg_dir, root, limit)
    templates = ["Phrase1", "Phrase2", "Phrase3"] if ablate_template else [None]
    for template in templates:
        run_cfg = dict(cfg)
        if template:
            run_cfg["template"] = template
        report = client.post("/v1/evaluate", {"dataset": dataset, "config": run_cfg})
        out_path = Path(out)
        if template:
            out_path = out_path.with_suffix(f".{template}.json")
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(report_to_json(report))
        if csv_out:
            out_path.with_suffix(".csv").write_text(report_mean_csv(report))
        mean = report.get("mean", {})
        click.echo(f"{out_path}: images={report['num_images']} "
                   f"failed={report['num_failed']} mean_hiou={mean.get('hiou')}")
        if report["num_failed"] == report["num_images"]:
            raise click.ClickException("every image failed to evaluate")


@main.command("embed-text")
@click.option("--vocab", "vocab_path", required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None,
              help="Write the embedding matrix (.emb) here.")
@common_options
@pipeline_options
def embed_text(vocab_path, out, server, model_dir, config_file, **cli_cfg):
    """Embed a vocabulary; prints the matrix shape, optionally saves it."""
    import numpy as np

    from .text_embed import write_embedding_file

    client = ApiClient(server, model_dir)
    cfg = _merge_config(_load_config_file(config_file), cli_cfg)
    resp = client.post("/v1/embed-text", {
        "vocab_path": str(Path(vocab_path).resolve()),
        "template": cfg.get("template"),
        "config": cfg,
    })
    click.echo(f"embedded {resp['shape'][0]} prompts -> {resp['shape']}")
    if out:
        rows = np.frombuffer(base64.b64decode(resp["data_b64"]),
                             dtype="<f4").reshape(resp["shape"])
        write_embedding_file(Path(out), rows, {
            "shape": resp["shape"],
            "categories": resp["categories"],
            "template": cfg.get("template") or "Phrase3",
        })
        click.echo(f"wrote {out}")


@main.command("convert-dataset")
@dataset_options
@click.option("--dst", "dst_root", required=True, type=click.Path())
@common_options
def convert_dataset(kind, annotations, image_dir, seg_dir, root, limit, dst_root,
                    server, model_dir, config_file):
    """Convert a benchmark dataset into the canonical on-disk format."""
    client = ApiClient(server, model_dir)
    resp = client.post("/v1/datasets/convert", {
        "dataset": _dataset_payload(kind, annotations, image_dir, seg_dir, root, limit),
        "dst_root": str(Path(dst_root).resolve()),
    })
    click.echo(f"wrote {resp['num_samples']} samples; manifest: {resp['manifest']}")


def _expand_images(paths) -> list[str]:
    exts = {".png", ".jpg", ".jpeg", ".bmp"}
    out: list[str] = []
    for p in paths:
        path = Path(p)
        if path.is_dir():
            out.extend(str(f) for f in sorted(path.iterdir())
                       if f.suffix.lower() in exts)
        else:
            out.append(str(path))
    return out


if __name__ == "__main__":
    main()
