import sys

from stealth_attacks.cli import main

sys.exit(main())
