"""Shipped data files: the 80-condition vocabulary and differential groups."""
