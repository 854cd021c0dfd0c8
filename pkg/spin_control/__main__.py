"""Allow `python -m spin_control`."""

from .cli import main

if __name__ == "__main__":
    main()
