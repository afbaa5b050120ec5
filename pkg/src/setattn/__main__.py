import sys

from setattn.harness.cli import main

sys.exit(main())
