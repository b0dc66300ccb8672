"""Oracles, case generation, sampling experiments and the command line."""
