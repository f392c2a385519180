"""Test suite for robust_game."""
