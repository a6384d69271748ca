"""
Entry point: python main.py <command> --config run.ini [--out DIR] [--seed N]
"""

import sys

from cli_io import main

if __name__ == "__main__":
    sys.exit(main())
