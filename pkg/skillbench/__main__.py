"""Allow ``python -m skillbench``."""

from skillbench.cli import main

raise SystemExit(main())
