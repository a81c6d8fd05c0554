"""bvforge: exact graded jet-algebra computations, antibrackets, and
master-equation solving for gauge systems."""

__version__ = "0.1.0"
