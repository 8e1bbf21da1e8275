"""Write the CSV data behind every sweep preset (fig2 ... fig7) into one directory.

    python3 scripts/reproduce_figures.py --out-dir figures --jobs 4
"""
import argparse
import pathlib
import sys
import time

from threshold_queue.cli import PRESETS, main


def run(out_dir: pathlib.Path, jobs: int) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in sorted(PRESETS):
        path = out_dir / f"{name}.csv"
        start = time.perf_counter()
        code = main(["sweep", "--preset", name, "--jobs", str(jobs), "--out", str(path)])
        if code:
            return code
        print(f"{name}: {path} ({time.perf_counter() - start:.1f} s)")
    return 0


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", type=pathlib.Path, default=pathlib.Path("figures"))
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()
    sys.exit(run(args.out_dir, args.jobs))
