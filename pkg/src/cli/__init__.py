"""Command-line front end (``python -m src.cli``); see main.build_parser."""
