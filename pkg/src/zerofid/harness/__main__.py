import sys

from zerofid.harness.cli import main

sys.exit(main())
