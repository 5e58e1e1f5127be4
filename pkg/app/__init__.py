"""
Pseudomode relaxation, Liouvillian exceptional points and quantum Mpemba crossings.
"""
