from msab.cli import main
import sys

sys.exit(main())
