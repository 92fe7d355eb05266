# cdforge/__main__.py

import sys

from cdforge.cli import main

sys.exit(main())
