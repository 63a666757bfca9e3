#!/usr/bin/env python3
from riplab.cli import main

if __name__ == "__main__":
    import sys
    sys.exit(main(sys.argv[1:]))
