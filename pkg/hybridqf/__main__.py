import sys

from hybridqf.cli import main

sys.exit(main())
