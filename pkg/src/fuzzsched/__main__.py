import sys

from fuzzsched.cli import main

sys.exit(main())
