import sys

from rlblock.cli import main

sys.exit(main())
