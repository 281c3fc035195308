"""Pivot-loop backends.

simplex_py is the always-available numpy implementation.  simplex_cy is the
compiled twin (built from simplex_cy.pyx when a C compiler was around at
install time); it follows the exact same array protocol.  Set
UCOPT_PURE_PYTHON=1 to force the fallback -- the kernel benchmark uses this,
and it doubles as an escape hatch if a binary wheel misbehaves.
"""
import os

from . import simplex_py

selected = simplex_py
backend_name = "python"

if not os.environ.get("UCOPT_PURE_PYTHON"):
    try:
        from . import simplex_cy
    except ImportError:
        pass
    else:
        selected = simplex_cy
        backend_name = "cython"
