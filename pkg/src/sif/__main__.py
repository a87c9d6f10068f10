import sys

from sif.cli import main

sys.exit(main())
