#!/usr/bin/env python3
"""Time-bin link lab: run or validate an experiment config.

    python link_lab.py run --config configs/qpt.json --out-dir output/qpt
    python link_lab.py validate --config configs/cow.json
"""

import sys
from pathlib import Path

# Add the project root to the Python path
sys.path.insert(0, str(Path(__file__).parent))

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
