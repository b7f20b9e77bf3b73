"""``python -m grasp.serve --model conv [--seed N] [--tcp HOST:PORT]``: serve a built-in model over the bridge."""
import sys

from .models.bridge import main

if __name__ == "__main__":
    sys.exit(main())
