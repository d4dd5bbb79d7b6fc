# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled inner loops for constrained-domination population sorting.

Semantics match srsearch.kernels' numpy fallback bit for bit: comparisons
only, no arithmetic, so both backends produce identical fronts.
"""


cdef inline bint _dominates(const double[:, ::1] keys, const double[::1] viol,
                            Py_ssize_t p, Py_ssize_t q, Py_ssize_t m) nogil:
    cdef Py_ssize_t col
    cdef bint strict = False
    if viol[p] != viol[q]:
        return viol[p] < viol[q]
    for col in range(m):
        if keys[p, col] > keys[q, col]:
            return False
        if keys[p, col] < keys[q, col]:
            strict = True
    return strict


def domination_matrix(const double[:, ::1] keys, const double[::1] violations,
                      unsigned char[:, ::1] out):
    """Fills out[p, q] = 1 iff individual p dominates individual q."""
    cdef Py_ssize_t n = keys.shape[0]
    cdef Py_ssize_t m = keys.shape[1]
    cdef Py_ssize_t p, q
    with nogil:
        for p in range(n):
            for q in range(n):
                out[p, q] = 1 if (p != q and _dominates(keys, violations, p, q, m)) else 0


def nondominated_mask(const double[:, ::1] keys, const double[::1] violations,
                      unsigned char[::1] out):
    """Fills out[q] = 1 iff no individual dominates q (early-exit scan)."""
    cdef Py_ssize_t n = keys.shape[0]
    cdef Py_ssize_t m = keys.shape[1]
    cdef Py_ssize_t p, q
    cdef bint dominated
    with nogil:
        for q in range(n):
            dominated = False
            for p in range(n):
                if p != q and _dominates(keys, violations, p, q, m):
                    dominated = True
                    break
            out[q] = 0 if dominated else 1
