import sys

from app.main import main

if __name__ == "__main__":
    # Run the command-line interface and hand its exit code to the shell
    sys.exit(main())
