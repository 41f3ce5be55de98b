"""Allow ``python -m cellfree_mec``."""

import sys

from cellfree_mec.cli import main

sys.exit(main())
