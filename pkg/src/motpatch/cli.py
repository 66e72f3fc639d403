"""Batch experiment driver.

Subcommands compose into the usual pipeline: `gen` rolls out a scenario,
`attack` perturbs its detection stream, `track` runs the tracker over a
detection file, `eval` scores a clean/attacked pair, `optimize` trains a
patch, and `sweep` repeats the whole chain over a parameter grid and plots
the attack metrics. Outputs land in --out (or $MOTPATCH_OUT, default
./runs); existing files are never overwritten unless --force is given.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .attack import AttackLedger, inject
from .config import ConfigError, RunConfig, load_config
from .io import (
    MotRecord,
    format_loss_trace,
    format_mot,
    load_mot,
    save_patch,
)
from .metrics import MetricsReport, build_report
from .patchopt.optimize import optimize_patch
from .patchopt.scene import build_clip_dataset, scenes_from_gt
from .scenario import generate
from .tracker import Detection, TrackingResult, group_by_frame, run_sequence

SWEEP_SERIES = ("tasr", "ior", "stasr")


class CliError(Exception):
    pass


# ---------------------------------------------------------------------------
# shared plumbing


def _out_dir(args) -> Path:
    root = args.out or os.environ.get("MOTPATCH_OUT") or "runs"
    path = Path(root)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_config(args) -> RunConfig:
    if not args.config:
        return RunConfig()
    cfg = load_config(args.config)
    if args.seed is not None:
        if cfg.scenario is not None:
            cfg = replace(cfg, scenario=replace(cfg.scenario, seed=args.seed))
        if cfg.attack is not None:
            cfg = replace(cfg, attack=replace(cfg.attack, seed=args.seed))
        cfg = replace(cfg, patch=replace(cfg.patch, seed=args.seed))
    return cfg


def _require_scenario(cfg: RunConfig):
    if cfg.scenario is None:
        raise CliError("this command needs a config with a scenario section")
    return cfg.scenario


def _guard(path: Path, force: bool) -> Path:
    if path.exists() and not force:
        raise CliError(f"{path} exists; pass --force to overwrite")
    return path


def _write(path: Path, text: str, force: bool) -> None:
    _guard(path, force).write_text(text)


def _detections_from_file(path: Path) -> list[Detection]:
    dets = []
    for r in load_mot(path):
        try:
            dets.append(Detection(box=r.bbox, score=r.conf, frame=r.frame))
        except ValueError as e:
            raise CliError(f"{path}: frame {r.frame}: {e}") from e
    return dets


def _detection_records(dets) -> list[MotRecord]:
    return [MotRecord.from_box(d.frame, -1, d.box, conf=d.score) for d in dets]


def _result_records(result: TrackingResult) -> list[MotRecord]:
    return [MotRecord.from_box(r.frame, r.track_id, r.box, conf=r.score) for r in result.rows]


def _track_file(path: Path | None, fallback: Path | None, flag: str) -> Path:
    p = path or fallback
    if p is None:
        raise CliError(f"missing {flag} (flag or config input section)")
    if not Path(p).is_file():
        raise CliError(f"{flag}: no such file: {p}")
    return Path(p)


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args) -> None:
    cfg = _load_config(args)
    spec = _require_scenario(cfg)
    out = _out_dir(args)
    data = generate(spec)
    _write(out / "gt.txt", format_mot(data.gt), args.force)
    _write(out / "detections.txt", format_mot(_detection_records(data.detections)), args.force)
    print(f"wrote {out}/gt.txt ({len(data.gt)} records) and "
          f"{out}/detections.txt ({len(data.detections)} records)")


def cmd_track(args) -> None:
    cfg = _load_config(args)
    det_path = _track_file(args.detections, cfg.input.detections if cfg.input else None, "--detections")
    dets = _detections_from_file(det_path)
    if not dets:
        raise CliError(f"{det_path}: no detections")
    frames = group_by_frame(dets, max(d.frame for d in dets))
    result = run_sequence(frames, cfg.tracker)
    out = _out_dir(args)
    name = f"tracks_{args.tag}.txt" if args.tag else "tracks.txt"
    _write(out / name, format_mot(_result_records(result)), args.force)
    print(f"wrote {out}/{name} ({len(result.rows)} rows, {len(result.track_ids())} tracks)")


def cmd_attack(args) -> None:
    cfg = _load_config(args)
    if cfg.attack is None:
        raise CliError("this command needs a config with an attack section")
    det_path = _track_file(args.detections, cfg.input.detections if cfg.input else None, "--detections")
    gt_path = _track_file(args.gt, cfg.input.gt if cfg.input else None, "--gt")
    dims = cfg.scenario.dims if cfg.scenario else (cfg.input.dims if cfg.input else None)
    if dims is None:
        raise CliError("frame dims unknown; give a scenario section or input.dims")
    dets = _detections_from_file(det_path)
    gt = load_mot(gt_path)
    perturbed, ledger = inject(dets, gt, cfg.attack, dims)
    out = _out_dir(args)
    _write(out / "attacked_detections.txt", format_mot(_detection_records(perturbed)), args.force)
    _write(out / "ledger.csv", ledger.to_csv(), args.force)
    print(f"wrote {out}/attacked_detections.txt and {out}/ledger.csv "
          f"({ledger.p_n} attacked boxes, r_bbox {ledger.r_bbox:.3f})")


def cmd_optimize(args) -> None:
    cfg = _load_config(args)
    spec = _require_scenario(cfg)
    data = generate(spec)
    boxes: dict[int, list] = {}
    for r in data.gt:
        boxes.setdefault(r.frame, []).append(r.bbox)
    scenes = scenes_from_gt(boxes, spec.dims)
    if cfg.patch.use_clips:
        scenes = build_clip_dataset(scenes, margin=cfg.patch.clip_margin)
    p = cfg.patch
    res = optimize_patch(
        scenes,
        weights=p.weights,
        eot=p.eot,
        iterations=p.iterations,
        step_size=p.step_size,
        seed=p.seed,
        patch_size=p.patch_size,
        selection_temp=p.selection_temp,
        init=p.init,
    )
    out = _out_dir(args)
    save_patch(_guard(out / "patch.ppm", args.force), res.patch)
    _write(out / "loss_trace.csv", format_loss_trace(res.trace), args.force)
    print(f"wrote {out}/patch.ppm and {out}/loss_trace.csv "
          f"(loss {res.initial.total:.4f} -> {res.final.total:.4f})")


def _load_eval_inputs(args):
    gt_path = _track_file(args.gt, None, "--gt")
    gt = load_mot(gt_path)
    if not gt:
        raise CliError(f"{gt_path}: empty ground truth")
    clean = load_mot(_track_file(args.clean, None, "--clean"))
    attacked = load_mot(_track_file(args.attacked, None, "--attacked"))
    ledger_path = _track_file(args.ledger, None, "--ledger")
    try:
        ledger = AttackLedger.from_csv(
            ledger_path.read_text(),
            n_frames=max(r.frame for r in gt),
            total_gt=len(gt),
        )
    except ValueError as e:
        raise CliError(f"{ledger_path}: {e}") from e
    return gt, clean, attacked, ledger


def cmd_eval(args) -> None:
    cfg = _load_config(args)
    gt, clean, attacked, ledger = _load_eval_inputs(args)
    victims = cfg.attack.victim_ids if cfg.attack else ()
    report = build_report(
        gt,
        clean,
        attacked,
        ledger,
        victim_ids=victims,
        restrict_stasr_to_victims=cfg.metrics.restrict_stasr_to_victims,
        restrict_ior_to_victims=cfg.metrics.restrict_ior_to_victims,
    )
    out = _out_dir(args)
    _write(out / "report.csv", report.to_csv(), args.force)
    print(f"wrote {out}/report.csv (TASR {report.tasr:.2f}, IOR {report.ior:.2f}, "
          f"STASR {report.stasr:.2f})")


# ---------------------------------------------------------------------------
# sweep


def _parse_sweep_value(token: str):
    token = token.strip()
    if ":" in token:
        lo, hi = token.split(":", 1)
        return (float(lo), float(hi))
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        return token


def _apply_param(cfg: RunConfig, dotted: str, value) -> RunConfig:
    parts = dotted.split(".")
    chain = [cfg]
    for name in parts[:-1]:
        node = getattr(chain[-1], name, None)
        if node is None:
            raise CliError(f"cannot sweep {dotted}: config has no {name} section")
        chain.append(node)
    if not hasattr(chain[-1], parts[-1]):
        raise CliError(f"unknown sweep parameter {dotted}")
    try:
        node = replace(chain[-1], **{parts[-1]: value})
        for obj, name in zip(reversed(chain[:-1]), reversed(parts[:-1])):
            node = replace(obj, **{name: node})
    except (TypeError, ValueError) as e:
        raise CliError(f"sweep value {value!r} rejected for {dotted}: {e}") from e
    return node


def _sweep_point(cfg: RunConfig, point_dir: Path, force: bool) -> MetricsReport:
    spec = cfg.scenario
    data = generate(spec)
    clean = run_sequence(group_by_frame(data.detections, spec.n_frames), cfg.tracker)
    perturbed, ledger = inject(data.detections, data.gt, cfg.attack, spec.dims)
    attacked = run_sequence(group_by_frame(perturbed, spec.n_frames), cfg.tracker)
    report = build_report(
        data.gt,
        _result_records(clean),
        _result_records(attacked),
        ledger,
        victim_ids=cfg.attack.victim_ids,
        restrict_stasr_to_victims=cfg.metrics.restrict_stasr_to_victims,
        restrict_ior_to_victims=cfg.metrics.restrict_ior_to_victims,
    )
    point_dir.mkdir(parents=True, exist_ok=True)
    files = {
        "gt.txt": format_mot(data.gt),
        "detections.txt": format_mot(_detection_records(data.detections)),
        "attacked_detections.txt": format_mot(_detection_records(perturbed)),
        "ledger.csv": ledger.to_csv(),
        "tracks_clean.txt": format_mot(_result_records(clean)),
        "tracks_attacked.txt": format_mot(_result_records(attacked)),
        "report.csv": report.to_csv(),
    }
    for name, text in files.items():
        _write(point_dir / name, text, force)
    return report


def _svg_sweep_plot(param: str, labels: list[str], xs: list[float],
                    series: dict[str, list[float]]) -> str:
    width, height = 640, 400
    left, right, top, bottom = 62.0, 150.0, 24.0, 48.0
    pw, ph = width - left - right, height - top - bottom
    y_max = max((v for vals in series.values() for v in vals), default=1.0)
    y_max = max(y_max * 1.1, 1.0)
    x_lo, x_hi = min(xs), max(xs)
    x_span = (x_hi - x_lo) or 1.0

    def px(x: float) -> float:
        return left + (x - x_lo) / x_span * pw

    def py(v: float) -> float:
        return top + ph - v / y_max * ph

    colors = {"tasr": "#1f77b4", "ior": "#d62728", "stasr": "#2ca02c"}
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for k in range(5):
        v = y_max * k / 4
        y = py(v)
        out.append(f'<line x1="{left - 4}" y1="{y:.1f}" x2="{left}" y2="{y:.1f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{y + 4:.1f}" text-anchor="end">{v:.1f}</text>')
    for label, x in zip(labels, xs):
        out.append(f'<line x1="{px(x):.1f}" y1="{top + ph}" x2="{px(x):.1f}" '
                   f'y2="{top + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{px(x):.1f}" y="{top + ph + 18:.1f}" text-anchor="middle">{label}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{param}</text>')
    for name, vals in series.items():
        pts = " ".join(f"{px(x):.1f},{py(v):.1f}" for x, v in zip(xs, vals))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{colors[name]}" stroke-width="1.5"/>')
    for i, name in enumerate(series):
        y = top + 14 + 18 * i
        out.append(f'<line x1="{left + pw + 16}" y1="{y}" x2="{left + pw + 40}" y2="{y}" '
                   f'stroke="{colors[name]}" stroke-width="1.5"/>')
        out.append(f'<text x="{left + pw + 46}" y="{y + 4}">{name.upper()}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cmd_sweep(args) -> None:
    cfg = _load_config(args)
    _require_scenario(cfg)
    if cfg.attack is None:
        raise CliError("this command needs a config with an attack section")
    tokens = [t for t in args.values.split(",") if t.strip()]
    if not tokens:
        raise CliError("--values is empty")
    points = [_apply_param(cfg, args.param, _parse_sweep_value(t)) for t in tokens]
    out = _out_dir(args)
    dirs = [out / f"point_{i:02d}" for i in range(len(points))]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            reports = list(pool.map(_sweep_point, points, dirs, [args.force] * len(points)))
    else:
        reports = [_sweep_point(p, d, args.force) for p, d in zip(points, dirs)]

    rows = [args.param + "," + MetricsReport.CSV_FIELDS]
    rows += [f"{t.strip()},{r.to_csv_row()}" for t, r in zip(tokens, reports)]
    _write(out / "sweep.csv", "\n".join(rows) + "\n", args.force)

    numeric = [_parse_sweep_value(t) for t in tokens]
    xs = [float(v) if isinstance(v, (int, float)) else float(i)
          for i, v in enumerate(numeric)]
    series = {name: [getattr(r, name) for r in reports] for name in SWEEP_SERIES}
    svg = _svg_sweep_plot(args.param, [t.strip() for t in tokens], xs, series)
    _write(out / "sweep.svg", svg, args.force)
    print(f"wrote {out}/sweep.csv ({len(reports)} rows) and {out}/sweep.svg")


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="JSON run-config file")
    shared.add_argument("--out", help="output directory (default $MOTPATCH_OUT or ./runs)")
    shared.add_argument("--seed", type=int, help="override scenario/attack/patch seeds")
    shared.add_argument("--force", action="store_true", help="overwrite existing outputs")

    parser = argparse.ArgumentParser(prog="motpatch",
                                     description="tracker attack simulation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[shared], help="generate scenario gt + detections")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("track", parents=[shared], help="run the tracker over detections")
    p.add_argument("--detections", help="MOT detections file")
    p.add_argument("--tag", help="suffix for the output file name")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("attack", parents=[shared], help="perturb a detection stream")
    p.add_argument("--detections", help="MOT detections file")
    p.add_argument("--gt", help="MOT ground-truth file")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("optimize", parents=[shared], help="train an adversarial patch")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("eval", parents=[shared], help="score a clean/attacked result pair")
    p.add_argument("--gt", required=True)
    p.add_argument("--clean", required=True)
    p.add_argument("--attacked", required=True)
    p.add_argument("--ledger", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", parents=[shared], help="pipeline over a parameter grid")
    p.add_argument("--param", required=True, help="dotted config key, e.g. attack.kappa_iou")
    p.add_argument("--values", required=True, help="comma-separated values (lo:hi for ranges)")
    p.add_argument("--jobs", type=int, default=1, help="parallel sweep workers")
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (CliError, ConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
