import sys

from campus_epi.cli import main

if __name__ == "__main__":
    sys.exit(main())
