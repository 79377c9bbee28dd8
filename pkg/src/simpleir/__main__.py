"""Module entry point: python -m simpleir."""

import sys

from .cli import main

sys.exit(main())
