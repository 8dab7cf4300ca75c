"""Bisimulation eq-level tools for first-order grammars.

Modules: terms (hash-consed regular terms), grammar (grammar files,
sink words, derived constants), lts (rule/action transitions), equiv
(eq-level oracle), plays (balanced-play transformation and checks),
bases (candidate bases and sequence bounds), cli (command-line driver).
"""

__version__ = "0.1.0"
