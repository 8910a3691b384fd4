"""
Main entry point for running kiesgcn as a module.

Usage: python -m kiesgcn <command> [options]
"""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
