"""Evaluation harness: synthetic corpora, simulated robots, replay and reports."""
