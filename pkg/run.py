# run.py
from src.cli import main

if __name__ == "__main__":
    # Run from the project root so `src` resolves as a package.
    raise SystemExit(main())
