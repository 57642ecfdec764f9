"""Allow ``python -m satellite_qkd``."""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
