"""Solver drivers invoked as subprocesses through the CLI command template."""
