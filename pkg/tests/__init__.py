"""Tests for the ggmc package."""
