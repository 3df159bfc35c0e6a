"""Command line front end.

Exit codes: 0 success, 2 configuration or input error, 3 tracking
divergence was reported during a run.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiment, persist, trajio
from .dhmm import dhmm_recognize
from .errors import MixtrackError
from .scenario import default_behavior_spec, generate_trajectory, make_dataset

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ValueError("config file must contain a JSON object")
    return cfg


def _write_json(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, default=float)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def cmd_generate(args) -> int:
    cfg = experiment.merged_config(_load_config(args.config))
    spec = default_behavior_spec(cfg["dt"], cfg["sub_stage_duration"])
    seed = args.seed if args.seed is not None else cfg["master_seed"]
    data = make_dataset(spec, args.per_behavior, seed, args.split)
    trajs = [t for ts in data.values() for t in ts]
    trajio.export_csv(trajs, args.out)
    print(f"wrote {len(trajs)} trajectories to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = experiment.merged_config(_load_config(args.config))
    if args.seed is not None:
        cfg["master_seed"] = args.seed
    spec = default_behavior_spec(cfg["dt"], cfg["sub_stage_duration"])
    data = make_dataset(spec, cfg["train_per_behavior"], cfg["master_seed"], "train")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.recognizer == "dhmm":
        models = experiment.train_benchmark_models(data, spec, cfg)
        persist.save_model(models.recognizer, out / "recognizer.json")
    else:
        model = experiment.train_flat_classifier(data, spec, cfg, args.recognizer)
        models = None
        persist.save_model(model, out / "recognizer.json")
    if args.evolution == "cgmr":
        if models is None:
            evolution, pooled = experiment.train_evolution(
                data,
                window=cfg["evolution_window"],
                n_components=cfg["cgmr_components"],
                pooled_components=cfg["ggmr_components"],
                restarts=cfg["cgmr_restarts"],
                seed=cfg["master_seed"] + 7,
            )
        else:
            evolution, pooled = models.evolution, models.pooled
        persist.save_model(pooled, out / "ggmr.json")
        for behavior, model in evolution.items():
            persist.save_model(model, out / f"cgmr_{behavior}.json")
    else:
        _, pooled = experiment.train_evolution(
            data,
            window=cfg["evolution_window"],
            n_components=cfg["cgmr_components"],
            pooled_components=cfg["ggmr_components"],
            restarts=cfg["cgmr_restarts"],
            seed=cfg["master_seed"] + 7,
        )
        persist.save_model(pooled, out / "ggmr.json")
    print(f"saved recognizer and evolution models to {out}")
    return EXIT_OK


def cmd_recognize(args) -> int:
    cfg = experiment.merged_config(_load_config(args.config))
    stack = persist.load_model(args.model)
    trajs = trajio.ingest_csv(args.input)
    rows = {}
    for idx, traj in enumerate(trajs):
        feats = experiment.recognizer_inputs(traj.observations, cfg["dt"])
        probs = dhmm_recognize(stack, feats)
        rows[f"traj_{idx}"] = {
            "final_probabilities": probs[-1].tolist(),
            "predicted": stack.class_labels[int(np.argmax(probs[-1]))],
        }
    _write_json(rows, args.out)
    return EXIT_OK


def cmd_track(args) -> int:
    cfg = experiment.merged_config(_load_config(args.config))
    if args.seed is not None:
        cfg["master_seed"] = args.seed
    if args.particles is not None:
        cfg["particles_per_component"] = args.particles
    if args.strategy is not None:
        cfg["strategy"] = args.strategy
    trajs = trajio.ingest_csv(args.input)
    transition = experiment.eq28_ssm_transition(cfg["dt"])
    report = {"config_hash": experiment.config_hash(cfg), "trajectories": {}}
    diverged = False
    for idx, traj in enumerate(trajs):
        rng = np.random.default_rng([cfg["master_seed"], 60, idx])
        est, reports, _ = experiment.track_trajectory(traj, transition, cfg, rng)
        entry = {"estimates": est.tolist()}
        if traj.states is not None:
            from .metrics import compute_mae

            entry["mae"] = compute_mae(est, traj.states).tolist()
        if any(r.divergence_alert for r in reports):
            entry["divergence"] = True
            diverged = True
        report["trajectories"][f"traj_{idx}"] = entry
    _write_json(report, args.out)
    return EXIT_DIVERGENCE if diverged else EXIT_OK


def _load_model_dir(path: Path, cfg: dict):
    from .htspm import HtspmModel

    recognizer = persist.load_model(path / "recognizer.json")
    evolution = {
        f.stem[len("cgmr_"):]: persist.load_model(f)
        for f in sorted(path.glob("cgmr_*.json"))
    }
    if not evolution:
        raise ValueError(f"no cgmr_<behavior>.json models found in {path}")
    return HtspmModel(
        recognizer=recognizer,
        evolution=evolution,
        behavior_labels=sorted(evolution),
        window=cfg["evolution_window"],
        frame_dim=3,
        jitter=np.asarray(cfg["evolution_jitter"], dtype=float),
    )


def cmd_predict(args) -> int:
    cfg = experiment.merged_config(_load_config(args.config))
    if args.seed is not None:
        cfg["master_seed"] = args.seed
    if args.particles is not None:
        cfg["particles_per_component"] = args.particles
    if args.strategy is not None:
        cfg["strategy"] = args.strategy
    model = _load_model_dir(Path(args.model), cfg)
    trajs = trajio.ingest_csv(args.input)
    report = {"config_hash": experiment.config_hash(cfg), "trajectories": {}}
    diverged = False
    for idx, traj in enumerate(trajs):
        rng = np.random.default_rng([cfg["master_seed"], 61, idx])
        est, predicted, reports = experiment.track_and_predict(
            traj, model, args.horizon, cfg, rng
        )
        entry = {
            "estimates": est.tolist(),
            "predicted_means": predicted.tolist(),
        }
        if any(r.divergence_alert for r in reports):
            entry["divergence"] = True
            diverged = True
        report["trajectories"][f"traj_{idx}"] = entry
    _write_json(report, args.out)
    return EXIT_DIVERGENCE if diverged else EXIT_OK


def cmd_compare(args) -> int:
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg["master_seed"] = args.seed
    if args.particles is not None:
        cfg["particles_per_component"] = args.particles
    if args.strategy is not None:
        cfg["strategy"] = args.strategy
    report = experiment.run_experiment(cfg)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        import csv

        with open(out / "mae_table.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["model", "x1", "x2", "x3"])
            for name, mae in report["mae"].items():
                w.writerow([name] + [f"{v:.17g}" for v in mae])
        per_step = report.pop("per_step_error", {})
        if per_step:
            names = sorted(per_step)
            with open(out / "per_step_error.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(
                    ["step"] + [f"{n}_x{d+1}" for n in names for d in range(3)]
                )
                n_steps = len(per_step[names[0]])
                for k in range(n_steps):
                    row = [k]
                    for n in names:
                        row += [f"{v:.17g}" for v in per_step[n][k]]
                    w.writerow(row)
        (out / "report.json").write_text(
            json.dumps(report, indent=2, default=float) + "\n"
        )
        print(f"wrote comparison report to {out}")
    else:
        report.pop("per_step_error", None)
        _write_json(report, None)
    return EXIT_OK


def cmd_scenario(args) -> int:
    seed = args.seed if args.seed is not None else 0
    if args.name == "occlusion":
        result = experiment.run_occlusion_scenario(seed)
        payload = {
            "abs_error_x1_by_step": result["abs_error"][:, 0].tolist(),
        }
    elif args.name == "birth-death":
        result = experiment.run_birth_death_scenario(seed)
        payload = {k: result[k] for k in ("added_at", "removed_at")}
        payload["component_counts"] = result["component_counts"]
    else:
        result = experiment.run_crossing_scenario(seed)
        payload = {"component_counts": result["component_counts"]}
    _write_json(payload, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mixtrack", description="Mixture particle tracking benchmark"
    )
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic trajectory CSV")
    g.add_argument("--per-behavior", type=int, default=10)
    g.add_argument("--split", default="train")
    g.add_argument("--config")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_generate)

    t = sub.add_parser("train", help="train recognizer and evolution models")
    t.add_argument(
        "--recognizer",
        choices=["dhmm", "flathmm", "gnb", "lda", "qda"],
        default="dhmm",
    )
    t.add_argument("--evolution", choices=["cgmr", "ggmr"], default="cgmr")
    t.add_argument("--config")
    t.add_argument("--seed", type=int)
    t.add_argument("--out", required=True)
    t.set_defaults(fn=cmd_train)

    r = sub.add_parser("recognize", help="classify trajectories from a CSV")
    r.add_argument("--model", required=True)
    r.add_argument("--input", required=True)
    r.add_argument("--config")
    r.add_argument("--out")
    r.set_defaults(fn=cmd_recognize)

    pr = sub.add_parser("predict", help="track a CSV then roll the mixture forward")
    pr.add_argument("--model", required=True, help="directory written by train")
    pr.add_argument("--input", required=True)
    pr.add_argument("--horizon", type=int, required=True)
    pr.add_argument("--config")
    pr.add_argument("--seed", type=int)
    pr.add_argument("--particles", type=int)
    pr.add_argument("--strategy", choices=["zero-weight", "rejection"])
    pr.add_argument("--out")
    pr.set_defaults(fn=cmd_predict)

    k = sub.add_parser("track", help="run the tracker over a trajectory CSV")
    k.add_argument("--input", required=True)
    k.add_argument("--config")
    k.add_argument("--seed", type=int)
    k.add_argument("--particles", type=int)
    k.add_argument("--strategy", choices=["zero-weight", "rejection"])
    k.add_argument("--out")
    k.set_defaults(fn=cmd_track)

    c = sub.add_parser("compare", help="full benchmark: train, track, report")
    c.add_argument("--config")
    c.add_argument("--seed", type=int)
    c.add_argument("--particles", type=int)
    c.add_argument("--strategy", choices=["zero-weight", "rejection"])
    c.add_argument("--out")
    c.set_defaults(fn=cmd_compare)

    s = sub.add_parser("scenario", help="run a canned multi-target scenario")
    s.add_argument("name", choices=["occlusion", "birth-death", "crossing"])
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_scenario)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (MixtrackError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
