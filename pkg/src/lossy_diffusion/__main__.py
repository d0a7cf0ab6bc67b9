import sys

from lossy_diffusion.cli import main

sys.exit(main())
