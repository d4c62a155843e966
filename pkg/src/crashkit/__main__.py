"""Module entry point so ``python3 -m crashkit`` matches the console script."""

import sys

from crashkit.cli import main

if __name__ == "__main__":
    sys.exit(main())
