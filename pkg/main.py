import sys

from qcbm_loader.api.commands import main

if __name__ == "__main__":
    sys.exit(main())
