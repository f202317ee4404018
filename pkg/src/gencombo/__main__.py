import sys

from gencombo.cli import main

sys.exit(main())
