"""Entrypoint for the hybridqf command line."""
from __future__ import annotations

import sys

from hybridqf.cli import main

if __name__ == "__main__":
    sys.exit(main())
