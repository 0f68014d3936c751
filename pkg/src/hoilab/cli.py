"""Command-line entry point: gen, train, eval, gradcheck, oracle, ablate.

Every command resolves one RunConfig (defaults ← file ← --set overrides)
and writes its artifacts, each embedding the config digest, into a run
directory. Exit codes: 0 success, 1 a check or criterion failed, 2 usage
or configuration error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from .categories import FrequencyTable, build_split, read_split, write_split
from .config import RunConfig, load_config
from .errors import ConfigError, DigestMismatchError, HoilabError, ParseError
from .evaluation import evaluate, write_report_csv, write_report_json
from .model import init_params, load_checkpoint, save_checkpoint
from .plots import plot_ablation, plot_category_ap, plot_training_curves
from .scenes import generate_scene, read_dataset, simulate_detections, write_dataset
from .training import train, write_training_log
from .verification import gradcheck_suite, oracle_suite

GRAD_TOL = 1e-4


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hoilab",
        description="Zero-shot human-object interaction detection at desk scale.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("gen", "synthesize train/eval scene datasets"),
        ("train", "train adapters on a dataset under a zero-shot split"),
        ("eval", "evaluate a checkpoint and write the AP report"),
        ("gradcheck", "finite-difference verification of all gradients"),
        ("oracle", "brute-force equivalence suite for every fast path"),
        ("ablate", "train baseline/locality/interaction/full and compare"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, default=None, help="key=value config file")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a config key (repeatable; last wins)",
        )
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, args.overrides)
        handler = {
            "gen": cmd_gen,
            "train": cmd_train,
            "eval": cmd_eval,
            "gradcheck": cmd_gradcheck,
            "oracle": cmd_oracle,
            "ablate": cmd_ablate,
        }[args.command]
        return handler(cfg)
    except (ConfigError, ParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DigestMismatchError as exc:
        print(f"error: {exc} (set force_digest=true to override)", file=sys.stderr)
        return 2
    except HoilabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _run_dir(cfg: RunConfig) -> Path:
    if cfg.run_dir:
        path = Path(cfg.run_dir)
    else:
        stamp = time.strftime("%Y%m%d-%H%M%S")
        path = Path(cfg.out_dir) / f"{stamp}-{cfg.digest()[:8]}"
    path.mkdir(parents=True, exist_ok=True)
    return path


def _scene_seed(data_seed: int, kind: str, index: int) -> int:
    base = {"train": 0, "eval": 1}[kind]
    return data_seed * 10_000_019 + base * 1_000_003 + index


def _generate_datasets(cfg: RunConfig):
    space = cfg.category_space()
    spec = cfg.scene_spec(space)
    noise = cfg.detector_noise()

    def build(kind: str, count: int):
        scenes, dets = [], []
        for i in range(count):
            seed = _scene_seed(cfg.data_seed, kind, i)
            scene = generate_scene(spec, seed)
            scenes.append(scene)
            dets.append(simulate_detections(scene, noise, seed, space.n_objects))
        return scenes, dets

    return space, build("train", cfg.train_scenes), build("eval", cfg.eval_scenes)


def cmd_gen(cfg: RunConfig) -> int:
    run_dir = _run_dir(cfg)
    digest = cfg.digest()
    space, (train_scenes, train_dets), (eval_scenes, eval_dets) = _generate_datasets(cfg)
    train_path = run_dir / "train.scenes"
    eval_path = run_dir / "eval.scenes"
    write_dataset(train_path, train_scenes, train_dets, digest)
    write_dataset(eval_path, eval_scenes, eval_dets, digest)
    cfg.write(run_dir / "config.txt")
    n_inst = sum(len(s.instances) for s in train_scenes)
    print(f"digest {digest}")
    print(f"wrote {train_path} ({len(train_scenes)} scenes, {n_inst} instances)")
    print(f"wrote {eval_path} ({len(eval_scenes)} scenes)")
    return 0


def _load_dataset(path: str, cfg: RunConfig):
    if not path:
        raise ConfigError("a dataset path is required (set data=... )")
    scenes, dets, digest = read_dataset(path)
    if digest != cfg.digest() and not cfg.force_digest:
        raise DigestMismatchError(
            f"dataset {path} has digest {digest}, config digest is {cfg.digest()}"
        )
    return scenes, dets


def _resolve_split(cfg: RunConfig, space, train_scenes):
    if cfg.split_file:
        return read_split(cfg.split_file, space)
    freq = None
    if cfg.split_setting in ("RF-UC", "NF-UC"):
        counts = np.zeros(space.n_categories)
        for scene in train_scenes:
            for inst in scene.instances:
                counts[inst.category_index] += 1
        freq = FrequencyTable(tuple(float(c) for c in counts))
    return build_split(
        space, cfg.split_setting, freq=freq, k=cfg.split_k, seed=cfg.split_seed
    )


def cmd_train(cfg: RunConfig) -> int:
    run_dir = _run_dir(cfg)
    digest = cfg.digest()
    space = cfg.category_space()
    scenes, dets = _load_dataset(cfg.data, cfg)
    split = _resolve_split(cfg, space, scenes)

    result = train(
        scenes,
        dets,
        space,
        split,
        cfg.model_config(),
        cfg.focal_config(),
        cfg.train_settings(),
    )
    for row in result.log:
        print(
            f"epoch {row.epoch}: loss {row.mean_loss:.6f} "
            f"val_seen {row.val_map_seen:.4f} val_unseen {row.val_map_unseen:.4f} "
            f"({row.wall_seconds:.1f} s)"
        )
    write_split(run_dir / "split.txt", split, space)
    save_checkpoint(run_dir / "checkpoint.ckpt", result.params, digest)
    write_training_log(run_dir / "train_log.csv", result.log)
    plot_training_curves(result.log, run_dir / "loss_curve.png")
    cfg.write(run_dir / "config.txt")
    print(f"best epoch {result.best_epoch}; skipped {result.skipped_scenes} pairless scenes")
    print(f"wrote {run_dir / 'checkpoint.ckpt'}")
    return 0


def cmd_eval(cfg: RunConfig) -> int:
    run_dir = _run_dir(cfg)
    digest = cfg.digest()
    space = cfg.category_space()
    scenes, dets = _load_dataset(cfg.eval_data or cfg.data, cfg)
    if not cfg.checkpoint:
        raise ConfigError("a checkpoint path is required (set checkpoint=...)")
    params = init_params(cfg.model_config(), space, seed=cfg.seed)
    load_checkpoint(cfg.checkpoint, params, expected_digest=digest, force=cfg.force_digest)
    split = _resolve_split(cfg, space, scenes)

    report = evaluate(
        params,
        cfg.model_config(),
        space,
        scenes,
        dets,
        split,
        lam=cfg.lambda_infer,
        iou_threshold=cfg.iou_threshold,
    )
    write_report_csv(run_dir / "report.csv", report, space, split, digest)
    write_report_json(run_dir / "report.json", report, space, split, digest)
    plot_category_ap(report, space, split, run_dir / "report_ap.png")
    cfg.write(run_dir / "config.txt")
    print(f"mAP unseen {report.map_unseen:.4f} seen {report.map_seen:.4f} full {report.map_full:.4f}")
    print(f"wrote {run_dir / 'report.csv'}")
    return 0


def cmd_gradcheck(cfg: RunConfig) -> int:
    results = gradcheck_suite(eps=1e-5)
    worst = 0.0
    for r in results:
        print(r.line())
        worst = max(worst, r.error)
    print(f"worst relative error: {worst:.3e}")
    return 0 if all(r.passed for r in results) else 1


def cmd_oracle(cfg: RunConfig) -> int:
    results = oracle_suite()
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"FAILED: {', '.join(failed)}")
        return 1
    return 0


ABLATION_VARIANTS = (
    ("baseline", False, False),
    ("locality", True, False),
    ("interaction", False, True),
    ("full", True, True),
)


def cmd_ablate(cfg: RunConfig) -> int:
    """Train the four adapter variants on fixed data/split/seeds and compare."""
    run_dir = _run_dir(cfg)
    digest = cfg.digest()
    space = cfg.category_space()
    if cfg.data and cfg.eval_data:
        train_scenes, train_dets = _load_dataset(cfg.data, cfg)
        eval_scenes, eval_dets = _load_dataset(cfg.eval_data, cfg)
    else:
        _, (train_scenes, train_dets), (eval_scenes, eval_dets) = _generate_datasets(cfg)
    split = _resolve_split(cfg, space, train_scenes)
    write_split(run_dir / "split.txt", split, space)

    detail_rows = []
    summary_rows = []
    for variant, use_loc, use_inter in ABLATION_VARIANTS:
        model_cfg = cfg.model_config(use_locality=use_loc, use_interaction=use_inter)
        collected = {"unseen": [], "seen": [], "full": []}
        for s in range(cfg.ablate_seeds):
            seed = cfg.seed + s
            result = train(
                train_scenes,
                train_dets,
                space,
                split,
                model_cfg,
                cfg.focal_config(),
                cfg.train_settings(seed=seed),
            )
            report = evaluate(
                result.params,
                model_cfg,
                space,
                eval_scenes,
                eval_dets,
                split,
                lam=cfg.lambda_infer,
                iou_threshold=cfg.iou_threshold,
            )
            detail_rows.append(
                {
                    "variant": variant,
                    "seed": seed,
                    "unseen": report.map_unseen,
                    "seen": report.map_seen,
                    "full": report.map_full,
                }
            )
            print(
                f"{variant} seed {seed}: unseen {report.map_unseen:.4f} "
                f"seen {report.map_seen:.4f} full {report.map_full:.4f}"
            )
        summary_rows.append(
            {
                "variant": variant,
                "locality": use_loc,
                "interaction": use_inter,
                **{
                    key: float(np.mean([r[key] for r in detail_rows if r["variant"] == variant]))
                    for key in ("unseen", "seen", "full")
                },
            }
        )

    _write_ablation_csv(run_dir / "ablation.csv", summary_rows, digest)
    _write_ablation_detail_csv(run_dir / "ablation_seeds.csv", detail_rows, digest)
    plot_ablation(summary_rows, run_dir / "ablation.png")
    cfg.write(run_dir / "config.txt")
    for row in summary_rows:
        print(
            f"{row['variant']:<12} unseen {row['unseen']:.4f} "
            f"seen {row['seen']:.4f} full {row['full']:.4f}"
        )
    print(f"wrote {run_dir / 'ablation.csv'}")
    return 0


def _mark(flag: bool) -> str:
    return "yes" if flag else "no"


def _write_ablation_csv(path, rows, digest):
    lines = [f"# hoilab-ablation v1 digest={digest}", "locality,interaction,unseen,seen,full"]
    for row in rows:
        lines.append(
            f"{_mark(row['locality'])},{_mark(row['interaction'])},"
            f"{row['unseen']:.6f},{row['seen']:.6f},{row['full']:.6f}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_ablation_detail_csv(path, rows, digest):
    lines = [f"# hoilab-ablation-seeds v1 digest={digest}", "variant,seed,unseen,seen,full"]
    for row in rows:
        lines.append(
            f"{row['variant']},{row['seed']},{row['unseen']:.6f},"
            f"{row['seen']:.6f},{row['full']:.6f}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    sys.exit(main())
