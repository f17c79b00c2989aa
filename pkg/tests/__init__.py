"""Tests package for fracns."""
