"""Minimal job runner.

    python -m fusionnet train job.json
    python -m fusionnet predict run_dir volume.nii.gz mod1.nii.gz mod2.nii.gz ...

A training job is a JSON object:

    {
      "modalities": ["washin.nii.gz", "pctenh.nii.gz"],
      "labels": "labels.nii.gz",
      "epochs": 50,
      "out_dir": "run",
      "model": {...ModelConfig fields...},
      "training": {...TrainingConfig fields...}
    }

Outputs under out_dir: model.pt, history.csv, model_config.json.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import torch

from .config import ModelConfig, TrainingConfig
from .data import load_slice_dataset
from .model import build_model
from .predict import predict_volume
from .train import train, write_history_csv


def _cmd_train(args: argparse.Namespace) -> int:
    job = json.loads(Path(args.job).read_text())
    model_cfg = ModelConfig(**job.get("model", {}))
    train_cfg = TrainingConfig(**job.get("training", {}))
    if model_cfg.n_modalities != len(job["modalities"]):
        raise ValueError("model n_modalities does not match the modality list")

    dataset = load_slice_dataset(job["modalities"], job["labels"], model_cfg.n_classes)
    torch.manual_seed(train_cfg.seed)
    model = build_model(model_cfg)
    history = train(model, dataset, train_cfg, int(job["epochs"]))

    out_dir = Path(job.get("out_dir", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.save(model.state_dict(), out_dir / "model.pt")
    write_history_csv(history, out_dir / "history.csv")
    (out_dir / "model_config.json").write_text(
        json.dumps(dataclasses.asdict(model_cfg), indent=2) + "\n"
    )
    print(f"trained {len(history)} epochs; final train loss {history[-1].train_loss:.6f}")
    return 0


def _cmd_predict(args: argparse.Namespace) -> int:
    run_dir = Path(args.run_dir)
    model_cfg = ModelConfig(**json.loads((run_dir / "model_config.json").read_text()))
    if model_cfg.n_modalities != len(args.modalities):
        raise ValueError("model expects a different number of modality volumes")
    model = build_model(model_cfg)
    model.load_state_dict(torch.load(run_dir / "model.pt", weights_only=True))
    predict_volume(model, args.modalities, args.out)
    print(f"wrote {args.out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="fusionnet")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="fit a model from a JSON job file")
    p_train.add_argument("job")
    p_train.set_defaults(func=_cmd_train)

    p_pred = sub.add_parser("predict", help="write class probabilities for a volume")
    p_pred.add_argument("run_dir")
    p_pred.add_argument("out")
    p_pred.add_argument("modalities", nargs="+")
    p_pred.set_defaults(func=_cmd_predict)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
