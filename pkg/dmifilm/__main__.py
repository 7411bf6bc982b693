import sys

from dmifilm.cli import main

sys.exit(main())
