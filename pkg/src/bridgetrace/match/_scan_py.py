"""Pure-Python reference implementation of the window-scan kernel.

Semantics must stay identical to the compiled kernel in _scan.pyx: for each
event, binary-search its candidate group's time-sorted slice for the window
lower bound, then count candidates inside the window whose interned value id
matches, recording the first two hit positions.
"""

from __future__ import annotations


def scan_window(starts, stops, lo, hi, want, cand_ts, cand_vid, out_n, out_first, out_second):
    for i in range(len(starts)):
        a = starts[i]
        b = stops[i]
        lo_i = lo[i]
        hi_i = hi[i]
        w = want[i]
        # lower bound of the time window within [a, b)
        while a < b:
            m = (a + b) // 2
            if cand_ts[m] < lo_i:
                a = m + 1
            else:
                b = m
        count = 0
        first = -1
        second = -1
        j = a
        end = stops[i]
        while j < end and cand_ts[j] <= hi_i:
            if cand_vid[j] == w:
                count += 1
                if count == 1:
                    first = j
                elif count == 2:
                    second = j
            j += 1
        out_n[i] = count
        out_first[i] = first
        out_second[i] = second
