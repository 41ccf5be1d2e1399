"""Allow `python3 -m snapshot_entropy <subcommand>`."""
from .cli import main

main()
