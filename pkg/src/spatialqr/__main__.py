import sys

from spatialqr.cli import main

sys.exit(main())
