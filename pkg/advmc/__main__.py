import sys

from advmc.main import main

sys.exit(main())
