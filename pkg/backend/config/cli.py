"""Entry point for the ``memnav`` console script.

``memnav gen-data ...`` is the same as ``manage.py gen_data ...``; the ledger
schema is migrated quietly before the first command runs.
"""

import os
import sys

COMMANDS = ("gen-data", "train", "eval", "render", "grad-check", "oracle-check", "show-runs")


def main(argv: list[str] | None = None) -> None:
    argv = list(sys.argv if argv is None else argv)
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "config.settings")

    import django
    from django.core.management import call_command, execute_from_command_line

    django.setup()
    if len(argv) > 1 and argv[1] in COMMANDS:
        argv[1] = argv[1].replace("-", "_")
        call_command("migrate", verbosity=0, interactive=False)
    execute_from_command_line(argv)


if __name__ == "__main__":
    main()
