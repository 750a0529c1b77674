"""
Twist Census

Exact epsilon factors of characters of quadratic extensions of Q_p and
the census of twists of Weil representations they decide.
"""

__version__ = "0.1.0"
