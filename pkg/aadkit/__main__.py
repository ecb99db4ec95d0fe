"""Allow ``python -m aadkit``."""
import sys

from .cli import main

sys.exit(main())
