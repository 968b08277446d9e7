"""Allow ``python -m dinofeat`` as an alias for the ``extract`` script."""

import sys

from .cli import main

sys.exit(main())
