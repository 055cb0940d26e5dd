import sys

from mccs.cli import main

sys.exit(main())
