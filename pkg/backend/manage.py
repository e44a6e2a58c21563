#!/usr/bin/env python
"""memnav management entry point; also accepts the dashed command names of the ``memnav`` script."""

from config.cli import main

if __name__ == "__main__":
    main()
