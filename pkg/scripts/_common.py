"""Small helpers shared by the experiment scripts."""

import argparse
import json
from pathlib import Path

from lctest.simlab import ExperimentConfig


def base_parser(description: str, default_config: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--config", default=str(Path(__file__).parent / "configs" / default_config))
    p.add_argument("--reps", type=int, help="override the replication count")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", default="results")
    return p


def load_config(args, **overrides) -> ExperimentConfig:
    raw = json.loads(Path(args.config).read_text())
    if args.reps:
        raw["reps"] = args.reps
    raw["workers"] = args.workers
    raw.update(overrides)
    return ExperimentConfig.from_dict(raw)


def print_table(rows, header):
    widths = [max(len(str(h)), *(len(str(r[i])) for r in rows)) for i, h in enumerate(header)]
    print("  ".join(str(h).rjust(w) for h, w in zip(header, widths)))
    for r in rows:
        print("  ".join(str(v).rjust(w) for v, w in zip(r, widths)))
