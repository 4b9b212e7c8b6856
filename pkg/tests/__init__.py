"""Tests for levyq."""
