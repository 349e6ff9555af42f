import sys

from foonplan.cli import main

sys.exit(main())
