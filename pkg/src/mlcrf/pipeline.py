"""End-to-end orchestration: propose / refine / evaluate / gridsearch / synth.

The two-phase design keeps any CNN out of process. Phase 1 (``propose``)
turns scene-level scores into region proposals, writes a JSON manifest per
image plus cropped color/depth patches, and an external fine model fills in
per-region score files. Phase 2 (``refine``) re-derives the proposals from
the same scene scores, refuses to run if they do not match the manifest
bit-for-bit, fuses the unaries, and runs the dense-CRF mean-field update to
produce the final mask.

Dataset directory layout (all per-image files keyed by image id):

    color/<id>.png          8-bit RGB
    depth/<id>.mlf          float32 mm, 0 = missing (optional)
    truth/<id>.png          0 = background, nonzero = waste (optional)
    scene_logits/<id>.mlf   float32 HxWx2 scores
    manifests/<id>.json     proposals + region score paths
    regions/<id>/region_<k>.mlf

Refine writes ``masks/<id>.png`` (0/255) and ``q/<id>.mlf`` under --out.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import os
from dataclasses import dataclass, replace

import numpy as np

from . import arrayio
from .arrayio import list_image_ids, read_array, write_array
from .config import RunConfig
from .densecrf import (
    ENERGY_PIXEL_CAP,
    MarginalField,
    build_kernels,
    energy,
    map_labels,
    mean_field,
)
from .depthfill import fill_missing
from .fields import ColorField, DepthField, LabelField, LogitField, ProbabilityField
from .metrics import ConfusionCounts, accumulate, format_table, iou, summarize, to_json
from .proposer import RegionProposal, propose
from .synth import CAMOUFLAGE_MARGIN_GAIN, generate_region_logits, generate_scene
from .unary import RegionTranslation, fuse_object_unary, resample_bilinear, softmax, to_unary


class StaleManifestError(ValueError):
    """Manifest proposals do not regenerate from the scene scores."""


# ---------------------------------------------------------------------------
# Scene-level decoding
# ---------------------------------------------------------------------------


def scene_probabilities(logits: LogitField) -> ProbabilityField:
    return softmax(logits)


def scene_argmax(probs: ProbabilityField) -> LabelField:
    return LabelField(
        np.argmax(probs.data, axis=2).astype(np.uint8), classes=probs.classes
    )


# ---------------------------------------------------------------------------
# Manifests
# ---------------------------------------------------------------------------


def proposal_hash(proposals: list[RegionProposal]) -> str:
    """Order-independent digest of the proposal rectangles."""
    rects = sorted((p.top, p.left, p.height, p.width) for p in proposals)
    blob = json.dumps(rects, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def manifest_dict(
    image_id: str,
    proposals: list[RegionProposal],
    logit_paths: list[str] | None = None,
) -> dict:
    regions = []
    for k, p in enumerate(proposals):
        entry = {"id": k, "top": p.top, "left": p.left, "height": p.height, "width": p.width}
        if logit_paths is not None:
            entry["logits"] = logit_paths[k]
        regions.append(entry)
    return {
        "image_id": image_id,
        "proposal_hash": proposal_hash(proposals),
        "regions": regions,
    }


def write_manifest(manifest: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def check_manifest(manifest: dict, regenerated: list[RegionProposal]) -> None:
    """Reject a manifest whose rectangles don't match freshly computed ones."""
    stored = sorted(
        (r["top"], r["left"], r["height"], r["width"]) for r in manifest["regions"]
    )
    fresh = sorted((p.top, p.left, p.height, p.width) for p in regenerated)
    if stored != fresh or manifest["proposal_hash"] != proposal_hash(regenerated):
        raise StaleManifestError(
            f"manifest for {manifest.get('image_id', '?')} is stale: proposals "
            f"do not regenerate from the scene scores"
        )


# ---------------------------------------------------------------------------
# Single-image refinement
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RefineResult:
    labels: LabelField
    marginals: MarginalField
    energy: float | None = None


def refine_image(
    scene_logits: LogitField,
    regions: list[tuple[RegionTranslation, LogitField]],
    color: ColorField,
    depth: DepthField | None,
    run: RunConfig,
    filter_impl: str = "fast",
    want_energy: bool = False,
) -> RefineResult:
    """Fuse unaries, run mean-field inference, decode the MAP labeling.

    ``regions`` pairs each proposal placement with the fine model's scores
    for it, at whatever resolution the fine model produced; scores are
    softmaxed and bilinearly resampled onto the proposal's image footprint
    before fusion. Depth, when given and enabled, is hole-filled here.
    """
    probs = softmax(scene_logits)
    unary_scene = to_unary(probs, run.probability_floor)

    fused_regions = []
    for translation, logits in regions:
        region_probs = softmax(logits)
        if (region_probs.height, region_probs.width) != (
            translation.region_height,
            translation.region_width,
        ):
            region_probs = resample_bilinear(
                region_probs, translation.region_width, translation.region_height
            )
        fused_regions.append((translation, to_unary(region_probs, run.probability_floor)))
    unary_fused = fuse_object_unary(unary_scene, fused_regions)

    filled = None
    if depth is not None and run.crf.use_depth:
        filled = fill_missing(depth, run.depth_fill_window)
    kernels = build_kernels(color, filled, run.crf)

    q = mean_field(unary_scene, unary_fused, kernels, run.crf, filter_impl=filter_impl)
    labels = map_labels(q)

    diag = None
    if want_energy and labels.height * labels.width <= ENERGY_PIXEL_CAP:
        diag = energy(labels, unary_scene, unary_fused, kernels, run.crf)
    return RefineResult(labels=labels, marginals=q, energy=diag)


# ---------------------------------------------------------------------------
# Dataset commands
# ---------------------------------------------------------------------------


def _dataset_ids(root) -> list[str]:
    logits_dir = os.path.join(root, "scene_logits")
    if not os.path.isdir(logits_dir):
        raise FileNotFoundError(f"no scene_logits directory under {root}")
    return list_image_ids(logits_dir, ".mlf")


def _read_depth(root, depth_dir, image_id) -> DepthField | None:
    directory = depth_dir if depth_dir is not None else os.path.join(root, "depth")
    path = os.path.join(directory, image_id + ".mlf")
    if os.path.exists(path):
        return read_array(path, expect="depth")
    png = os.path.join(directory, image_id + ".png")
    if os.path.exists(png):
        return arrayio.read_depth_png(png)
    return None


def run_propose(root, out, run: RunConfig) -> dict[str, int]:
    """Phase 1: proposals, manifests, and region crops for every image."""
    os.makedirs(os.path.join(out, "manifests"), exist_ok=True)
    region_counts: dict[str, int] = {}
    for image_id in _dataset_ids(root):
        logits = read_array(
            os.path.join(root, "scene_logits", image_id + ".mlf"), expect="logits"
        )
        proposals = propose(scene_argmax(scene_probabilities(logits)), run.proposer)
        manifest = manifest_dict(image_id, proposals)
        write_manifest(manifest, os.path.join(out, "manifests", image_id + ".json"))
        region_counts[image_id] = len(proposals)

        if not proposals:
            continue
        crop_dir = os.path.join(out, "crops", image_id)
        os.makedirs(crop_dir, exist_ok=True)
        color_path = os.path.join(root, "color", image_id + ".png")
        color = arrayio.read_png_color(color_path) if os.path.exists(color_path) else None
        depth = _read_depth(root, None, image_id)
        for k, p in enumerate(proposals):
            if color is not None:
                patch = ColorField(color.data[p.top : p.bottom, p.left : p.right])
                arrayio.write_png_color(patch, os.path.join(crop_dir, f"region_{k}_color.png"))
            if depth is not None:
                patch = DepthField(
                    depth.data[p.top : p.bottom, p.left : p.right],
                    depth.missing[p.top : p.bottom, p.left : p.right],
                )
                write_array(patch, os.path.join(crop_dir, f"region_{k}_depth.mlf"))
    return region_counts


def _load_regions(
    root, image_id, manifest: dict
) -> list[tuple[RegionTranslation, LogitField]]:
    regions = []
    for entry in manifest["regions"]:
        rel = entry.get("logits", os.path.join("regions", image_id, f"region_{entry['id']}.mlf"))
        path = os.path.join(root, rel)
        if not os.path.exists(path):
            raise FileNotFoundError(f"{image_id}: missing region score file {path}")
        logits = read_array(path, expect="logits")
        translation = RegionTranslation(
            offset_row=entry["top"],
            offset_col=entry["left"],
            region_height=entry["height"],
            region_width=entry["width"],
        )
        regions.append((translation, logits))
    return regions


def refine_dataset_image(
    root, image_id: str, run: RunConfig, depth_dir=None, use_depth=None,
    filter_impl: str = "fast", want_energy: bool = False,
) -> RefineResult:
    """Load one image's inputs, enforce phase integrity, and refine."""
    scene_logits = read_array(
        os.path.join(root, "scene_logits", image_id + ".mlf"), expect="logits"
    )
    manifest = read_manifest(os.path.join(root, "manifests", image_id + ".json"))
    regenerated = propose(scene_argmax(scene_probabilities(scene_logits)), run.proposer)
    check_manifest(manifest, regenerated)

    regions = _load_regions(root, image_id, manifest)
    color = arrayio.read_png_color(os.path.join(root, "color", image_id + ".png"))
    effective = run if use_depth is None else replace(run, crf=run.crf.with_depth(use_depth))
    depth = None
    if effective.crf.use_depth and depth_dir != "none":
        depth = _read_depth(root, depth_dir, image_id)
    return refine_image(
        scene_logits, regions, color, depth, effective,
        filter_impl=filter_impl, want_energy=want_energy,
    )


def run_refine(
    root, out, run: RunConfig, depth_dir=None, use_depth=None,
    filter_impl: str = "fast", verbose: bool = False,
) -> list[str]:
    """Phase 2 over a dataset; writes masks and marginals under ``out``."""
    os.makedirs(os.path.join(out, "masks"), exist_ok=True)
    os.makedirs(os.path.join(out, "q"), exist_ok=True)
    ids = _dataset_ids(root)
    for image_id in ids:
        result = refine_dataset_image(
            root, image_id, run, depth_dir=depth_dir, use_depth=use_depth,
            filter_impl=filter_impl, want_energy=verbose,
        )
        arrayio.write_png_mask(result.labels, os.path.join(out, "masks", image_id + ".png"))
        write_array(
            ProbabilityField(result.marginals.data.astype(np.float32)),
            os.path.join(out, "q", image_id + ".mlf"),
        )
        if verbose:
            note = f"energy={result.energy:.4f}" if result.energy is not None else "energy=n/a"
            print(f"{image_id}: {note}")
    return ids


def run_evaluate(pred_dir, truth_dir) -> tuple[ConfusionCounts, dict[str, float]]:
    """Dataset-aggregated metrics; the id sets must match exactly."""
    pred_ids = set(list_image_ids(pred_dir, ".png"))
    truth_ids = set(list_image_ids(truth_dir, ".png"))
    if pred_ids != truth_ids:
        missing = sorted(truth_ids - pred_ids)[:5]
        extra = sorted(pred_ids - truth_ids)[:5]
        raise ValueError(
            f"prediction/truth id sets differ (missing {missing}, extra {extra})"
        )
    counts = ConfusionCounts(2)
    for image_id in sorted(pred_ids):
        pred = arrayio.read_png_mask(os.path.join(pred_dir, image_id + ".png"))
        truth = arrayio.read_png_mask(os.path.join(truth_dir, image_id + ".png"))
        accumulate(pred, truth, counts)
    return counts, summarize(counts)


def write_metrics(counts: ConfusionCounts, out, label: str = "") -> None:
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "metrics.txt"), "w") as fh:
        fh.write(format_table(counts, label) + "\n")
    with open(os.path.join(out, "metrics.json"), "w") as fh:
        fh.write(to_json(counts))


# ---------------------------------------------------------------------------
# Grid search
# ---------------------------------------------------------------------------

_GRIDABLE = {
    "alpha", "w_appearance", "w_smooth", "w_depth",
    "theta_alpha", "theta_beta", "theta_gamma", "theta_delta", "theta_epsilon",
    "iterations",
}


def run_gridsearch(
    root, grid: dict[str, list], run: RunConfig, filter_impl: str = "fast",
) -> tuple[RunConfig, list[dict]]:
    """Exhaustive search over the Cartesian grid, scored by waste-class IoU.

    The table has one row per grid point in first-in-grid order; the best
    row is the first one achieving the maximum IoU on the validation set.
    """
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ValueError("grid must list at least one value per parameter")
    unknown = set(grid) - _GRIDABLE
    if unknown:
        raise ValueError(f"cannot grid over {sorted(unknown)}")

    truth_dir = os.path.join(root, "truth")
    ids = _dataset_ids(root)
    truths = {
        i: arrayio.read_png_mask(os.path.join(truth_dir, i + ".png")) for i in ids
    }

    keys = list(grid.keys())
    rows: list[dict] = []
    best: tuple[float, int] | None = None
    for combo_index, combo in enumerate(itertools.product(*(grid[k] for k in keys))):
        candidate = replace(run, crf=replace(run.crf, **dict(zip(keys, combo))))
        counts = ConfusionCounts(2)
        for image_id in ids:
            result = refine_dataset_image(root, image_id, candidate, filter_impl=filter_impl)
            accumulate(result.labels, truths[image_id], counts)
        score = iou(counts, 1)
        rows.append({**dict(zip(keys, combo)), "waste_iou": score})
        if best is None or score > best[0]:
            best = (score, combo_index)

    best_combo = rows[best[1]]
    best_run = replace(
        run, crf=replace(run.crf, **{k: best_combo[k] for k in keys})
    )
    return best_run, rows


def format_grid_table(rows: list[dict]) -> str:
    keys = [k for k in rows[0] if k != "waste_iou"]
    head = " ".join(f"{k:>14s}" for k in keys) + f" {'waste_iou':>10s}"
    lines = [head]
    for row in rows:
        lines.append(
            " ".join(f"{row[k]:>14g}" for k in keys) + f" {row['waste_iou']:>10.4f}"
        )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Synthetic dataset generation
# ---------------------------------------------------------------------------


def run_synth(
    out, seed: int, count: int, size: int = 64, noise: float = 1.0,
    camouflage: bool = False, run: RunConfig | None = None,
) -> list[str]:
    """Write a complete synthetic dataset (inputs + manifests + region scores)."""
    run = run if run is not None else RunConfig()
    for sub in ("color", "depth", "truth", "scene_logits", "manifests"):
        os.makedirs(os.path.join(out, sub), exist_ok=True)

    ids = []
    for index in range(count):
        rng = np.random.default_rng([seed, index])
        scene = generate_scene(rng, size=size, noise=noise, camouflage=camouflage)
        image_id = f"synth_{index:04d}"
        ids.append(image_id)

        arrayio.write_png_color(scene.color, os.path.join(out, "color", image_id + ".png"))
        write_array(scene.depth, os.path.join(out, "depth", image_id + ".mlf"))
        arrayio.write_png_mask(scene.truth, os.path.join(out, "truth", image_id + ".png"))
        write_array(scene.scene_logits, os.path.join(out, "scene_logits", image_id + ".mlf"))

        proposals = propose(
            scene_argmax(scene_probabilities(scene.scene_logits)), run.proposer
        )
        logit_paths = []
        if proposals:
            region_dir = os.path.join(out, "regions", image_id)
            os.makedirs(region_dir, exist_ok=True)
        for k, p in enumerate(proposals):
            rel = os.path.join("regions", image_id, f"region_{k}.mlf")
            write_array(
                generate_region_logits(
                    scene.truth, p, rng, noise=noise,
                    margin_gain=CAMOUFLAGE_MARGIN_GAIN if camouflage else 1.0,
                ),
                os.path.join(out, rel),
            )
            logit_paths.append(rel)
        write_manifest(
            manifest_dict(image_id, proposals, logit_paths),
            os.path.join(out, "manifests", image_id + ".json"),
        )
    return ids
