import sys

from ditrecon.cli import main

sys.exit(main())
