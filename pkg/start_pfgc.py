"""
Startup script for the PFGC command line.
Handles Python path configuration and dispatches to cli.main.
"""

import os
import sys

# Add the project root to Python path
project_root = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, project_root)

if __name__ == "__main__":
    from cli.main import main

    sys.exit(main())
