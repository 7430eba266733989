import sys

from mapemon.cli import main

sys.exit(main())
