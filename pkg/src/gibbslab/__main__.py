import sys

from gibbslab.cli import main

sys.exit(main())
