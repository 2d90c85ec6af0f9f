import sys

from pointineq.cli import main

sys.exit(main())
