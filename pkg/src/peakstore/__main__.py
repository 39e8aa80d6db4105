import sys

from peakstore.cli import main

sys.exit(main())
