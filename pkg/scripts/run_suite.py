"""Small version of every benchmark, for a quick end-to-end check."""

import subprocess
import sys
from pathlib import Path

HERE = Path(__file__).parent

RUNS = [
    ["run_discrete.py", "--seeds", "2", "--a", "0.03", "--standard-N", "20000"],
    ["run_gamma.py", "--seeds", "2", "--M", "2000"],
    ["run_poisson.py", "--seeds", "1", "--batches", "200"],
    ["run_sv.py", "--seeds", "1", "--M", "2000", "--T", "200"],
]


def main() -> None:
    out = sys.argv[1] if len(sys.argv) > 1 else "results"
    for cmd in RUNS:
        subprocess.run([sys.executable, str(HERE / cmd[0]), "--out", out, *cmd[1:]], check=True)


if __name__ == "__main__":
    main()
