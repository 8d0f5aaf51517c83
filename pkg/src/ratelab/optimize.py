"""One-dimensional search primitives."""

from __future__ import annotations

import math
from typing import Callable


INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f: Callable[[float], float], lo: float, hi: float,
                   tol: float = 1e-9, max_iter: int = 200) -> tuple[float, float]:
    """Minimize a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))``.

    Stops when the bracket is narrower than ``tol`` or stops shrinking in
    floating point.
    """
    if hi < lo:
        lo, hi = hi, lo
    x1 = hi - INV_PHI * (hi - lo)
    x2 = lo + INV_PHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - INV_PHI * (hi - lo)
            if not lo < x1 < x2:
                break
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + INV_PHI * (hi - lo)
            if not x1 < x2 < hi:
                break
            f2 = f(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)

