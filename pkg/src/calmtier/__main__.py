import sys

from calmtier.cli import main

sys.exit(main())
