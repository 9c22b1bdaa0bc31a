"""Terminal amplitude -psi_t(s-1, s) vs the free walk for both Fig. 1 frames.

    python scripts/fig1_amplitudes.py [outdir]
"""

import sys
from pathlib import Path

from kickback_walk.cli import main

out = Path(sys.argv[1] if len(sys.argv) > 1 else "results")
out.mkdir(parents=True, exist_ok=True)
for a, tag in ((4, "a"), (3, "b")):
    main(["amplitude", "--s", "7", "--a", str(a), "--b", "5", "--out", str(out / f"fig1{tag}.csv")])
    print(f"wrote {out / f'fig1{tag}.csv'}")
