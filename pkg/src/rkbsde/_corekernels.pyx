# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Typed inner loops for correlating grid functions with small tap kernels.

These are the hot kernels of the backward solver: for every step, stage,
and quadrature node a short kernel (Lagrange taps, or a collapsed
quadrature-times-interpolation kernel) is swept across a stored grid
function.  The pure-Python fallback in :mod:`rkbsde.kernels` implements the
same contracts with vectorized numpy.
"""


def correlate(const double[::1] g, const double[::1] kernel,
              Py_ssize_t shift, double[::1] out):
    """out[i] = sum_t kernel[t] * g[i + shift + t] for 0 <= i < len(out).

    ``shift`` locates the first tap of the window for out[0] inside ``g``.
    The whole window must lie inside ``g``; raises ``ValueError`` otherwise.
    """
    cdef Py_ssize_t nout = out.shape[0]
    cdef Py_ssize_t nk = kernel.shape[0]
    cdef Py_ssize_t i, t
    cdef double acc
    if nout == 0:
        return
    if nk == 0:
        raise ValueError("kernel must have at least one tap")
    if shift < 0 or shift + (nout - 1) + (nk - 1) >= g.shape[0]:
        raise ValueError(
            "kernel window [%d, %d] exceeds source extent %d"
            % (shift, shift + nout - 1 + nk - 1, g.shape[0])
        )
    for i in range(nout):
        acc = 0.0
        for t in range(nk):
            acc += kernel[t] * g[i + shift + t]
        out[i] = acc


def correlate_pair(const double[::1] ga, const double[::1] gb,
                   const double[::1] kernel, Py_ssize_t shift,
                   double[::1] outa, double[::1] outb):
    """Correlate two equally sized sources with one kernel in a single sweep.

    ``outa[i] = sum_t kernel[t] * ga[i + shift + t]`` and likewise for
    ``outb``; both sources and both outputs must have matching lengths.
    """
    cdef Py_ssize_t nout = outa.shape[0]
    cdef Py_ssize_t nk = kernel.shape[0]
    cdef Py_ssize_t i, t
    cdef double acca, accb, w
    if gb.shape[0] != ga.shape[0]:
        raise ValueError("sources must have equal length")
    if outb.shape[0] != nout:
        raise ValueError("outputs must have equal length")
    if nout == 0:
        return
    if nk == 0:
        raise ValueError("kernel must have at least one tap")
    if shift < 0 or shift + (nout - 1) + (nk - 1) >= ga.shape[0]:
        raise ValueError(
            "kernel window [%d, %d] exceeds source extent %d"
            % (shift, shift + nout - 1 + nk - 1, ga.shape[0])
        )
    for i in range(nout):
        acca = 0.0
        accb = 0.0
        for t in range(nk):
            w = kernel[t]
            acca += w * ga[i + shift + t]
            accb += w * gb[i + shift + t]
        outa[i] = acca
        outb[i] = accb
