"""Allow ``python -m extubate``."""

from .cli import main

raise SystemExit(main())
