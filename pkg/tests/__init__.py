"""Test helpers and fixtures."""
