import sys

from mrrh.cli import main

sys.exit(main())
