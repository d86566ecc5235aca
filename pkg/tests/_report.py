"""Shared sink for acceptance verdict lines.

test_acceptance appends one line per criterion as it finishes; the conftest
terminal-summary hook prints whatever has accumulated as its own section, so
the verdicts survive output capture and land in one block at the end of the
run.
"""

LINES: list = []
