# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled window-scan kernel; _scan_py.py is the reference implementation."""


def scan_window(const long long[::1] starts, const long long[::1] stops,
                const long long[::1] lo, const long long[::1] hi,
                const long long[::1] want,
                const long long[::1] cand_ts, const long long[::1] cand_vid,
                long long[::1] out_n, long long[::1] out_first, long long[::1] out_second):
    cdef Py_ssize_t i, n = starts.shape[0]
    cdef long long a, b, end, m, j, lo_i, hi_i, w, count, first, second
    for i in range(n):
        a = starts[i]
        b = stops[i]
        end = stops[i]
        lo_i = lo[i]
        hi_i = hi[i]
        w = want[i]
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
