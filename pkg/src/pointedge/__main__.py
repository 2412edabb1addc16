"""Allow ``python -m pointedge`` to behave like the installed entry point."""

from .cli import main

if __name__ == "__main__":
    raise SystemExit(main())
