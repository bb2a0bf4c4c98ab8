"""Command-line front end: segment, explain, evaluate, synth, model-check.

Every run writes a provenance JSON with the fully resolved configuration and
seed; re-running from the same inputs reproduces outputs bit for bit with
synthetic predictors.  Exit codes: 0 success, 2 usage/input error,
3 transport/protocol error, 4 internal error.
"""

import json
import logging
import os
import sys
from pathlib import Path

import click
import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__
from .errors import (FormatError, ParameterError, ProtocolError, RevexError,
                     TransportError, UndefinedDropError)
from .evaluation import (GroundTruthTrack, auc, average_drop, best_iou,
                         deletion_curve, insertion_curve, pointing_game,
                         write_metrics_csv)
from .explainers import SaliencyVolume
from .perturbation import DEFAULT_REMOVAL_BLUR, RemovalOperator
from .pipeline import METHODS, MethodConfig, resolve_class_index, run_method
from .predictors import (RemotePredictor, encode_predict_request,
                         resolve_predictor, save_predictor_spec)
from .segmentation import (SegmentationMap, SlicParams, grid_3d,
                           read_segmentation, slic_3d, write_segmentation)
from .synth import SYNTH_PREDICTOR_BLUR, region_weights_from_box, synth_scene
from .tensor import (VideoTensor, read_frames, read_tensor, read_volume,
                     write_frames, write_tensor, write_volume)
from .visualization import (RenderConfig, boundary_overlay, composite,
                            contact_sheet, normalize_saliency)

EXIT_USAGE = 2
EXIT_TRANSPORT = 3
EXIT_INTERNAL = 4

logger = logging.getLogger("revex")


def _setup_logging():
    level = os.environ.get("REVEX_LOG", "info").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s")


def load_config(path):
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ParameterError(f"config file not found: {p}")
    return tomllib.loads(p.read_text())


def merged(config, section, key, flag_value, default=None):
    """Flag beats config file beats default."""
    if flag_value is not None:
        return flag_value
    return config.get(section, {}).get(key, default)


def load_video(path):
    p = Path(path)
    if not p.exists():
        raise ParameterError(f"input not found: {p}")
    if p.is_dir():
        return read_frames(p)
    return read_tensor(p)


def parse_seg_spec(spec):
    """grid:NT,NY,NX or slic:N."""
    kind, _, rest = spec.partition(":")
    if kind == "grid":
        parts = [int(v) for v in rest.split(",")]
        if len(parts) != 3:
            raise ParameterError(f"grid spec needs nt,ny,nx, got {rest!r}")
        return ("grid", tuple(parts))
    if kind == "slic":
        return ("slic", int(rest))
    raise ParameterError(f"unknown segmentation spec {spec!r}")


def build_removal(kind, color=(0.0, 0.0, 0.0)):
    if kind not in ("blur", "constant", "mean"):
        raise ParameterError(f"--removal must be blur|constant|mean, got {kind!r}")
    return RemovalOperator("region_mean" if kind == "mean" else kind,
                           blur=DEFAULT_REMOVAL_BLUR, color=tuple(color))


def write_provenance(path, record):
    Path(path).write_text(json.dumps(record, indent=2, sort_keys=True,
                                     default=str) + "\n")


@click.group()
@click.version_option(__version__, prog_name="revex")
def cli():
    """Removal-based saliency explanations for video classifiers."""
    _setup_logging()


@cli.command()
@click.argument("input_path")
@click.option("--seg", "seg_spec", default=None, help="grid:NT,NY,NX or slic:N")
@click.option("--out", "out_dir", default=None, help="output directory")
@click.option("--compactness", type=float, default=None)
@click.option("--iters", type=int, default=None)
@click.option("--config", "config_path", default=None, help="TOML config file")
def segment(input_path, seg_spec, out_dir, compactness, iters, config_path):
    """Partition a video into regions and render boundary overlays."""
    config = load_config(config_path)
    seg_spec = merged(config, "segment", "seg", seg_spec, "slic:200")
    out_dir = Path(merged(config, "segment", "out", out_dir, "segment_out"))
    compactness = merged(config, "segment", "compactness", compactness, 10.0)
    iters = merged(config, "segment", "iters", iters, 10)

    video = load_video(input_path)
    kind, arg = parse_seg_spec(seg_spec)
    if kind == "grid":
        seg = grid_3d(video.t, video.h, video.w, *arg)
    else:
        seg = slic_3d(video, SlicParams(n_segments=arg, compactness=compactness,
                                        max_iters=iters))
    out_dir.mkdir(parents=True, exist_ok=True)
    write_segmentation(seg, out_dir / "segmentation.rvx")
    overlay = boundary_overlay(video, seg)
    write_frames(overlay, out_dir / "boundaries")
    contact_sheet(overlay, out_dir / "boundaries_sheet.png")
    write_provenance(out_dir / "provenance.json", {
        "command": "segment", "input": str(input_path), "seg": seg_spec,
        "compactness": compactness, "iters": iters, "region_count": seg.r,
    })
    logger.info("segmented into %d regions -> %s", seg.r, out_dir)
    click.echo(f"regions: {seg.r}")


@cli.command()
@click.argument("input_path")
@click.option("--method", "methods", multiple=True,
              type=click.Choice(METHODS), help="repeatable; default all six")
@click.option("--predictor", "predictor_arg", default=None,
              help="builtin:echo | spec.json | http://host:port")
@click.option("--class", "class_spec", default=None, help="class index or top1")
@click.option("--seed", type=int, default=None)
@click.option("--samples", type=int, default=None)
@click.option("--regions", type=int, default=None)
@click.option("--removal", "removal_kind", default=None,
              type=click.Choice(["blur", "constant", "mean"]))
@click.option("--out", "out_dir", default=None)
@click.option("--dump-perturbed", is_flag=True, default=False,
              help="dump the first perturbed sample per method as RVX")
@click.option("--config", "config_path", default=None)
def explain(input_path, methods, predictor_arg, class_spec, seed, samples,
            regions, removal_kind, out_dir, dump_perturbed, config_path):
    """Run explanation methods and write saliency volumes + overlays."""
    config = load_config(config_path)
    methods = list(methods) or list(config.get("explain", {}).get("methods", METHODS))
    predictor_arg = merged(config, "explain", "predictor", predictor_arg,
                           "builtin:echo")
    class_spec = merged(config, "explain", "class", class_spec, "top1")
    seed = merged(config, "explain", "seed", seed, 0)
    samples = merged(config, "explain", "samples", samples)
    regions = merged(config, "explain", "regions", regions, 200)
    removal_kind = merged(config, "explain", "removal", removal_kind, "blur")
    out_dir = Path(merged(config, "explain", "out", out_dir, "explain_out"))

    video = load_video(input_path)
    predictor = resolve_predictor(predictor_arg)
    removal = build_removal(removal_kind)
    class_index = resolve_class_index(class_spec, predictor, video)

    results = []
    for method in methods:
        cfg = MethodConfig(method=method, n_regions=regions, n_samples=samples,
                           removal=removal, keep_first_sample=dump_perturbed)
        res = run_method(video, cfg, predictor, class_index=class_index,
                         seed=seed)
        logger.info("%s: %d samples, seg %.2fs inference %.2fs explanation %.2fs",
                    method, res.sample_count, res.timings.segmentation,
                    res.timings.inference, res.timings.explanation)
        results.append(res)

    # all methods succeeded: persist everything (no partial outputs otherwise)
    out_dir.mkdir(parents=True, exist_ok=True)
    for res in results:
        stem = res.method.replace("-", "_")
        write_volume(res.saliency.data, out_dir / f"saliency_{stem}.rvx")
        write_provenance(out_dir / f"provenance_{stem}.json", res.provenance)
        rendered = composite(video, normalize_saliency(res.saliency),
                             RenderConfig())
        write_frames(rendered, out_dir / f"overlay_{stem}")
        contact_sheet(rendered, out_dir / f"overlay_{stem}_sheet.png")
        if dump_perturbed and res.first_sample is not None:
            write_tensor(VideoTensor(res.first_sample),
                         out_dir / f"perturbed_{stem}.rvx")
        click.echo(f"{res.method}: samples={res.sample_count} "
                   f"seg={res.timings.segmentation:.2f}s "
                   f"inf={res.timings.inference:.2f}s "
                   f"exp={res.timings.explanation:.2f}s")
    write_provenance(out_dir / "provenance.json", {
        "command": "explain", "input": str(input_path), "methods": methods,
        "predictor": predictor_arg, "class_index": class_index, "seed": seed,
        "samples": samples, "regions": regions, "removal": removal_kind,
    })


@cli.command()
@click.argument("input_path")
@click.option("--saliency", "saliency_path", required=True,
              help="saliency RVX file or directory of saliency_*.rvx")
@click.option("--predictor", "predictor_arg", default=None)
@click.option("--class", "class_spec", default=None)
@click.option("--gt", "gt_path", default=None, help="ground-truth track JSON")
@click.option("--metrics", "metrics_spec", default=None,
              help="comma list: deletion,insertion,avg_drop,pointing,iou")
@click.option("--steps", type=int, default=None)
@click.option("--removal", "removal_kind", default=None,
              type=click.Choice(["blur", "constant", "mean"]))
@click.option("--video-id", default=None)
@click.option("--out", "out_csv", default=None)
@click.option("--config", "config_path", default=None)
def evaluate(input_path, saliency_path, predictor_arg, class_spec, gt_path,
             metrics_spec, steps, removal_kind, video_id, out_csv, config_path):
    """Score saliency volumes with the five evaluation metrics."""
    config = load_config(config_path)
    predictor_arg = merged(config, "evaluate", "predictor", predictor_arg,
                           "builtin:echo")
    class_spec = merged(config, "evaluate", "class", class_spec, "top1")
    steps = merged(config, "evaluate", "steps", steps, 20)
    removal_kind = merged(config, "evaluate", "removal", removal_kind, "blur")
    out_csv = Path(merged(config, "evaluate", "out", out_csv, "metrics.csv"))
    gt_path = merged(config, "evaluate", "gt", gt_path)
    metrics_spec = merged(config, "evaluate", "metrics", metrics_spec)

    default_metrics = "deletion,insertion,avg_drop" + (
        ",pointing,iou" if gt_path else "")
    wanted = [m.strip() for m in (metrics_spec or default_metrics).split(",") if m]
    known = {"deletion", "insertion", "avg_drop", "pointing", "iou"}
    unknown = set(wanted) - known
    if unknown:
        raise ParameterError(f"unknown metrics: {sorted(unknown)}")
    if {"pointing", "iou"} & set(wanted) and not gt_path:
        raise ParameterError("pointing/iou metrics need --gt ground truth")

    video = load_video(input_path)
    track = GroundTruthTrack.from_json(gt_path) if gt_path else None
    predictor = resolve_predictor(predictor_arg)
    removal = build_removal(removal_kind)
    class_index = resolve_class_index(class_spec, predictor, video)
    vid = video_id or Path(input_path).stem

    sal_path = Path(saliency_path)
    if not sal_path.exists():
        raise ParameterError(f"saliency path not found: {sal_path}")
    if sal_path.is_dir():
        files = sorted(sal_path.glob("saliency_*.rvx"))
        if not files:
            raise ParameterError(f"no saliency_*.rvx files in {sal_path}")
    else:
        files = [sal_path]

    rows = []
    for f in files:
        sal = read_volume(f)
        method = f.stem.replace("saliency_", "").replace("_", "-")
        row = {"video_id": vid, "method": method}
        if "deletion" in wanted:
            row["deletion_auc"] = round(auc(deletion_curve(
                video, sal, predictor, class_index, steps, removal)), 6)
        if "insertion" in wanted:
            row["insertion_auc"] = round(auc(insertion_curve(
                video, sal, predictor, class_index, steps, removal)), 6)
        if "avg_drop" in wanted:
            row["avg_drop_pct"] = round(average_drop(
                video, sal, predictor, class_index, removal), 4)
        if "pointing" in wanted:
            row["pointing_hit"] = pointing_game(sal, track)
        if "iou" in wanted:
            res = best_iou(sal, track)
            row["best_iou"] = round(res.best_iou, 6)
            row["best_threshold"] = res.best_threshold
        rows.append(row)
        click.echo(" ".join(f"{k}={v}" for k, v in row.items()))
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(rows, out_csv)
    write_provenance(out_csv.with_suffix(".provenance.json"), {
        "command": "evaluate", "input": str(input_path),
        "saliency": str(saliency_path), "predictor": predictor_arg,
        "class_index": class_index, "metrics": wanted, "steps": steps,
        "removal": removal_kind, "gt": gt_path and str(gt_path),
    })


@cli.command()
@click.option("--out", "out_dir", default=None)
@click.option("--seed", type=int, default=None)
@click.option("--track-seed", type=int, default=None)
@click.option("--frames", type=int, default=None)
@click.option("--size", type=int, default=None)
@click.option("--box-frac", type=float, default=None)
@click.option("--classes", type=int, default=None)
@click.option("--motion", type=int, default=None)
@click.option("--predictor-kind", default=None,
              type=click.Choice(["hf_box", "region_linear"]))
@click.option("--config", "config_path", default=None)
def synth(out_dir, seed, track_seed, frames, size, box_frac, classes, motion,
          predictor_kind, config_path):
    """Generate a synthetic scene, predictor spec, and ground-truth track."""
    config = load_config(config_path)
    out_dir = Path(merged(config, "synth", "out", out_dir, "synth_out"))
    seed = merged(config, "synth", "seed", seed, 0)
    track_seed = merged(config, "synth", "track_seed", track_seed)
    frames = merged(config, "synth", "frames", frames, 16)
    size = merged(config, "synth", "size", size, 112)
    box_frac = merged(config, "synth", "box_frac", box_frac, 0.1)
    classes = merged(config, "synth", "classes", classes, 2)
    motion = merged(config, "synth", "motion", motion, 0)
    predictor_kind = merged(config, "synth", "predictor_kind", predictor_kind,
                            "hf_box")

    scene = synth_scene(t=frames, h=size, w=size, box_frac=box_frac, seed=seed,
                        track_seed=track_seed, motion=motion)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_tensor(scene.video, out_dir / "video.rvx")
    scene.track.to_json(out_dir / "gt.json")
    write_volume(scene.gt_saliency, out_dir / "gt_saliency.rvx")

    blur = {"sigma_space": SYNTH_PREDICTOR_BLUR.sigma_space,
            "sigma_time": SYNTH_PREDICTOR_BLUR.sigma_time,
            "truncation": SYNTH_PREDICTOR_BLUR.truncation}
    if predictor_kind == "hf_box":
        spec = {"kind": "hf_box", "box": list(scene.box_hull), "gain": 1.0,
                "class_count": classes, "target_class": 0, "blur": blur,
                "reference": "video.rvx"}
    else:
        seg = grid_3d(frames, size, size, 2, 4, 4)
        write_segmentation(seg, out_dir / "segmentation.rvx")
        weights = region_weights_from_box(seg, scene.box_hull)
        spec = {"kind": "region_linear", "weights": [float(v) for v in weights],
                "bias": 0.05, "class_count": classes, "target_class": 0,
                "blur": blur, "reference": "video.rvx",
                "segmentation": "segmentation.rvx"}
    save_predictor_spec(spec, out_dir / "predictor.json")
    write_provenance(out_dir / "provenance.json", {
        "command": "synth", "seed": seed, "track_seed": track_seed,
        "frames": frames, "size": size, "box_frac": box_frac,
        "classes": classes, "motion": motion, "predictor_kind": predictor_kind,
        "box_hull": list(scene.box_hull),
    })
    click.echo(f"scene written to {out_dir} (box hull {scene.box_hull})")


@cli.command("model-check")
@click.argument("endpoint")
@click.option("--shape", default="2,8,8,3", help="t,h,w,c probe tensor shape")
def model_check(endpoint, shape):
    """Probe a remote predictor for wire-protocol conformance."""
    dims = tuple(int(v) for v in shape.split(","))
    if len(dims) != 4:
        raise ParameterError(f"--shape needs t,h,w,c, got {shape!r}")
    client = RemotePredictor(endpoint)
    info = client.info()
    click.echo(f"/info: {info}")
    if info["class_count"] < 1 or info["max_batch"] < 1:
        raise ProtocolError(f"invalid /info fields: {info}")

    zero = np.zeros((1,) + dims, dtype=np.float32)
    impulse = np.zeros((1,) + dims, dtype=np.float32)
    impulse[0, dims[0] // 2, dims[1] // 2, dims[2] // 2, 0] = 1.0
    for name, batch in (("zero", zero), ("impulse", impulse)):
        conf = client.predict(batch)
        if conf.shape != (1, info["class_count"]):
            raise ProtocolError(
                f"{name} tensor: confidences shape {conf.shape}, expected "
                f"(1, {info['class_count']})")
        if conf.min() < 0.0 or conf.max() > 1.0:
            raise ProtocolError(f"{name} tensor: confidences outside [0, 1]")
        if info["normalized"] and abs(conf.sum() - 1.0) > 1e-3:
            raise ProtocolError(
                f"{name} tensor: declared normalized but sum = {conf.sum()!r}")
        click.echo(f"predict({name}): ok {np.round(conf[0], 4).tolist()}")
    click.echo("conformant")


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except click.exceptions.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except (ParameterError, FormatError, UndefinedDropError,
            FileNotFoundError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_USAGE
    except (TransportError, ProtocolError) as exc:
        click.echo(f"transport error: {exc}", err=True)
        return EXIT_TRANSPORT
    except RevexError as exc:
        click.echo(f"internal error: {exc}", err=True)
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - defensive
        click.echo(f"internal error: {exc}", err=True)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
