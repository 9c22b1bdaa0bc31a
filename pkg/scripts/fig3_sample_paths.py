"""Trajectories that visit (a+1, b) for s=25, a=11, b=13, interacting and free.

    python scripts/fig3_sample_paths.py [outdir] [n_traj]
"""

import sys
from pathlib import Path

from kickback_walk.cli import main

out = Path(sys.argv[1] if len(sys.argv) > 1 else "results")
n = sys.argv[2] if len(sys.argv) > 2 else "10000"
out.mkdir(parents=True, exist_ok=True)
for flag, tag in (("--no-free", "interacting"), ("--free", "free")):
    main(["sample", flag, "--n-traj", n, "--hits-only", "--format", "json", "--out", str(out / f"fig3_{tag}.jsonl")])
