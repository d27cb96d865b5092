"""Utility subpackage for ddgcn.

This package organises utility functions by responsibility:

- ``io``: Atomic writes, decimal formatting, TSV matrix files, platform info.
- ``text``: ``key=value`` headers and delimited label lists.
"""
