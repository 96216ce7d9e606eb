"""Command-line interface.

    sculpt run <config.json> [--mode M] [--k1 N] [--k2 N] [--seed S]
                             [--policy P] [--trace-masks] [--output-dir D]
    sculpt sweep <config.json> --k 0,8,16,32
    sculpt validate-insight <config.json> [--policy {random,high,low,all}]
                             [--seeds 0,1] [--report PATH]
    sculpt export-view <asset-dir>

Exit codes: 0 success, 2 configuration error, 3 numeric abort. Relative
output directories resolve under $SCULPT_ROOT when it is set.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, NumericError
from .insight import POLICY_SHORT, validate_insight, write_report
from .pipeline import (
    COLOR_FILE,
    MANIFEST_FILE,
    PROJECTION_FILE,
    VOXEL_FILE,
    RunConfig,
    render_projection,
    run_style_guided,
    save_image,
)
from .sgc import intensity_sweep


def _load_config(args) -> RunConfig:
    config = RunConfig.from_json(args.config)
    g = config.guidance
    overrides = {}
    if getattr(args, "mode", None):
        overrides["mode"] = args.mode
    if getattr(args, "k1", None) is not None:
        overrides["k_stage1"] = args.k1
    if getattr(args, "k2", None) is not None:
        overrides["k_stage2"] = args.k2
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "policy", None) and args.policy != "all":
        overrides["policy"] = POLICY_SHORT.get(args.policy, args.policy)
    if overrides:
        config = replace(config, guidance=replace(g, **overrides))
    if getattr(args, "trace_masks", False):
        config = replace(config, trace_masks=True)
    if getattr(args, "output_dir", None):
        config = replace(config, output_dir=args.output_dir)
    return config


def _cmd_run(args) -> int:
    config = _load_config(args)
    export = run_style_guided(config)
    print(f"mode={config.guidance.mode} voxels={export.manifest['voxel_count']} "
          f"config_hash={export.manifest.get('config_hash', '')}")
    if export.output_dir is not None:
        print(f"exported to {export.output_dir}")
    return 0


def _cmd_sweep(args) -> int:
    config = _load_config(args)
    k_values = [int(v) for v in args.k.split(",") if v.strip() != ""]
    if not k_values:
        raise ConfigError("--k needs at least one value")
    config.validate_paths()
    from .conditioning import load_image

    content = load_image(config.content_image)
    styles = [load_image(p) for p in config.style_images]
    for k, export in intensity_sweep(content, styles, k_values, config):
        traced = len(export.debug.final.context.mask_trace)
        print(f"k={k}: voxels={export.manifest['voxel_count']} mask_entries={traced}")
    return 0


def _cmd_validate_insight(args) -> int:
    config = _load_config(args)
    if args.policy == "all":
        policies = ("random", "high_variance", "low_variance")
    else:
        policies = (POLICY_SHORT[args.policy],)
        if "low_variance" not in policies:
            policies = policies + ("low_variance",)
    seeds = None
    if args.seeds:
        seeds = [int(s) for s in args.seeds.split(",")]
    report = validate_insight(config, policies=policies, seeds=seeds)
    print(f"{'policy':<16} {'stage1-exp':>12} {'stage2-exp':>12} {'content-dist':>13}")
    for policy, row in sorted(report["per_policy"].items()):
        print(f"{policy:<16} {row['stage1_experiment']:>12.6f} "
              f"{row['stage2_experiment']:>12.6f} {row['content_distance']:>13.6f}")
    if "ordering" in report:
        mark = "OK" if report["ordering"]["low_below_high"] else "VIOLATED"
        print(f"low-variance below high-variance: {mark}")
    report_path = args.report
    if report_path is None:
        out = config.resolved_output_dir()
        report_path = None if out is None else out / "insight_report.json"
    if report_path is not None:
        print(f"report written to {write_report(report, report_path)}")
    return 0


def _cmd_export_view(args) -> int:
    asset_dir = Path(args.asset_dir)
    manifest_path = asset_dir / MANIFEST_FILE
    if not manifest_path.exists():
        raise ConfigError(f"no asset manifest under {asset_dir}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    count = manifest["voxel_count"]
    resolution = manifest["grid_resolution"]
    coords = np.frombuffer((asset_dir / VOXEL_FILE).read_bytes(),
                           dtype=manifest["voxel_dtype"]).reshape(count, 3)
    colors = np.frombuffer((asset_dir / COLOR_FILE).read_bytes(),
                           dtype=manifest["color_dtype"]).reshape(count, 3).astype(np.float64)
    from .conditioning import ImageInput

    img = render_projection(coords.astype(np.int64), colors, resolution, cell=8)
    out_path = asset_dir / PROJECTION_FILE
    save_image(ImageInput(pixels=np.clip(img, 0, 1), source_id="view"), out_path)
    print(f"wrote {out_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sculpt",
                                     description="style-guided 3D generation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one style-guided generation")
    run_p.add_argument("config")
    run_p.add_argument("--mode", choices=("dual", "texture_only", "geometry_only", "off"))
    run_p.add_argument("--k1", type=int)
    run_p.add_argument("--k2", type=int)
    run_p.add_argument("--seed", type=int)
    run_p.add_argument("--policy", choices=("random", "high", "low"))
    run_p.add_argument("--trace-masks", action="store_true", dest="trace_masks")
    run_p.add_argument("--output-dir", dest="output_dir")
    run_p.set_defaults(func=_cmd_run)

    sweep_p = sub.add_parser("sweep", help="style-intensity sweep over K values")
    sweep_p.add_argument("config")
    sweep_p.add_argument("--k", required=True, help="comma-separated K values")
    sweep_p.add_argument("--seed", type=int)
    sweep_p.add_argument("--output-dir", dest="output_dir")
    sweep_p.set_defaults(func=_cmd_sweep)

    insight_p = sub.add_parser("validate-insight",
                               help="compare random/high/low channel selection")
    insight_p.add_argument("config")
    insight_p.add_argument("--policy", choices=("random", "high", "low", "all"),
                           default="all")
    insight_p.add_argument("--seeds", help="comma-separated seed list")
    insight_p.add_argument("--report", help="report JSON path")
    insight_p.add_argument("--output-dir", dest="output_dir")
    insight_p.set_defaults(func=_cmd_validate_insight)

    view_p = sub.add_parser("export-view", help="re-render an exported asset")
    view_p.add_argument("asset_dir")
    view_p.set_defaults(func=_cmd_export_view)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
