"""
Quantum module - bath model, spectral core, Liouvillian, dynamics, Mpemba analysis.
"""
