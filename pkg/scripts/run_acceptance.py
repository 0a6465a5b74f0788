#!/usr/bin/env python3
"""Run the acceptance suite and print one line per criterion.

    python3 scripts/run_acceptance.py            # all criteria
    python3 scripts/run_acceptance.py -k "01 or 10"
"""

import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    cmd = [sys.executable, "-m", "pytest", str(ROOT / "tests" / "test_acceptance.py"), "-m", "acceptance",
           "-q", "-rxX", *sys.argv[1:]]
    sys.exit(subprocess.call(cmd, cwd=ROOT))
