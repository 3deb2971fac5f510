"""Module entry point: `python -m grtt` behaves like the grtt command."""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
