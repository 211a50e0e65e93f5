"""``python -m fmanifold``: the ``fman`` command."""

import sys

from .cli import main

sys.exit(main())
