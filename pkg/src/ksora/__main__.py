import sys

from ksora.harness.cli import main

sys.exit(main())
