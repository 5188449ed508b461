import sys

from lagflow.cli import main

sys.exit(main())
