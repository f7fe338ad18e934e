"""Decision procedures for fusions of one-variable first-order modal logics."""

import sys

if sys.getrecursionlimit() < 20000:
    sys.setrecursionlimit(20000)

__version__ = "0.1.0"
