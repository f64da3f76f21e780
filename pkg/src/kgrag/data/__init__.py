"""Bundled data files (mock extraction lexicon)."""
