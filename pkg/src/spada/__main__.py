"""Allow `python -m spada` as an alternative to the `spada` console script."""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
