"""Zigzag scan order of an 8x8 block."""

import numpy as np


def _build_zigzag():
    order = []
    for s in range(15):
        diag = [(r, s - r) for r in range(8) if 0 <= s - r < 8]
        if s % 2 == 0:
            diag.reverse()
        order.extend(r * 8 + c for r, c in diag)
    return np.array(order, dtype=np.intp)


#: ``ZIGZAG[k]`` is the natural (row-major) index of zigzag position ``k``.
ZIGZAG = _build_zigzag()
#: ``INVERSE_ZIGZAG[n]`` is the zigzag position of natural index ``n``.
INVERSE_ZIGZAG = np.argsort(ZIGZAG)

ZIGZAG.setflags(write=False)
INVERSE_ZIGZAG.setflags(write=False)
