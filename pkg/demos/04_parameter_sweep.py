"""Sweep the false-box overlap parameter through the command line interface."""

import json
from pathlib import Path

from motpatch.cli import main

cfg = {
    "scenario": {"preset": "crossing", "n_frames": 80, "seed": 3},
    "attack": {"mode": "id_hijack", "victim_ids": [1], "onset": 30, "duration": 20},
}
cfg_path = Path("runs/demo-sweep-config.json")
cfg_path.parent.mkdir(parents=True, exist_ok=True)
cfg_path.write_text(json.dumps(cfg, indent=2))

code = main([
    "sweep", "--config", str(cfg_path), "--out", "runs/demo-sweep", "--force",
    "--param", "attack.kappa_iou", "--values", "0.3,0.5,0.7,0.9",
])
if code == 0:
    print(Path("runs/demo-sweep/sweep.csv").read_text().rstrip())
    print("plot: runs/demo-sweep/sweep.svg")
raise SystemExit(code)
