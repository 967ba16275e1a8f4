import sys

from staeb.cli import main

sys.exit(main())
