# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled simulation engines.

Statement-for-statement mirror of hopbound.sim._pycore; both backends must
return bit-identical tuples for identical arguments.  Any semantic change
has to land in both files.
"""

from libc.math cimport exp, log, log1p, pow
from libc.stdlib cimport free, malloc

ctypedef unsigned long long u64

cdef double _INV_2POW53 = 1.0 / 9007199254740992.0

cdef u64 _LINK_KEY = 0xA24BAED4963EE407ULL
cdef u64 _STEP_KEY = 0x9FB21C651E98DF25ULL
cdef u64 _SUB_KEY = 0xD6E8FEB86659FD93ULL

cdef double _comb16(int k):
    # exact for C(16, k): every intermediate is an integer below 2^53
    cdef double num = 1.0
    cdef int i
    for i in range(k):
        num = num * (16 - i)
    for i in range(k):
        num = num / (i + 1)
    return num


# O-QPSK DSSS BER series constants; signs folded into the binomials.
cdef double[15] _BER_COEF
cdef double[15] _BER_EXPO
cdef int _k
for _k in range(2, 17):
    _BER_COEF[_k - 2] = (1.0 if _k % 2 == 0 else -1.0) * _comb16(_k)
    _BER_EXPO[_k - 2] = 20.0 * (1.0 / _k - 1.0)

cdef double _BER_SCALE = (8.0 / 15.0) * (1.0 / 16.0)


cdef inline u64 _mix64(u64 z) nogil:
    z = z + 0x9E3779B97F4A7C15ULL
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double _u01(u64 seed, u64 link, u64 step, u64 sub) nogil:
    cdef u64 x = seed
    x = _mix64(x ^ ((link + 1) * _LINK_KEY))
    x = _mix64(x ^ ((step + 1) * _STEP_KEY))
    x = _mix64(x ^ ((sub + 1) * _SUB_KEY))
    return (x >> 11) * _INV_2POW53


def uniform01(seed, link, step, sub):
    """Counter-based draw in [0, 1); exposed for cross-backend parity tests."""
    return _u01(<u64> seed, <u64> link, <u64> step, <u64> sub)


cdef inline double _ber(double snr) nogil:
    cdef double acc = 0.0
    cdef int i
    for i in range(15):
        acc += _BER_COEF[i] * exp(_BER_EXPO[i] * snr)
    cdef double b = _BER_SCALE * acc
    return b if b > 0.0 else 0.0


def run_fluid(seed, gbars, double cnat, double rate_bits, long long arrival_interval,
              long long steps, long long warmup, long long tail, double backlog_limit):
    """See hopbound.sim._pycore.run_fluid."""
    cdef u64 cseed = <u64> seed
    cdef int n = len(gbars)
    cdef int link
    cdef long long t = 0, t_next = 1, w, sample_end = steps - tail
    cdef long long samples = 0, wsum = 0, pending
    cdef double d_cum = 0.0, arrived = 0.0, backlog_sum = 0.0, gap_sum = 0.0
    cdef double u, snr, cap, take, inflow, total_q, need
    cdef bint diverged = False

    cdef double *gb = <double *> malloc(n * sizeof(double))
    cdef double *q = <double *> malloc(n * sizeof(double))
    cdef long long *hist = <long long *> malloc((tail + 2) * sizeof(long long))
    if gb == NULL or q == NULL or hist == NULL:
        free(gb); free(q); free(hist)
        raise MemoryError()
    for link in range(n):
        gb[link] = gbars[link]
        q[link] = 0.0
    for w in range(tail + 2):
        hist[w] = 0

    try:
        with nogil:
            for t in range(steps):
                if t % arrival_interval == 0:
                    q[0] += rate_bits
                    arrived += rate_bits
                inflow = 0.0
                for link in range(n):
                    u = _u01(cseed, link, t, 0)
                    snr = -gb[link] * log(1.0 - u)
                    cap = cnat * log1p(snr)
                    q[link] += inflow
                    take = q[link] if q[link] < cap else cap
                    q[link] -= take
                    inflow = take
                d_cum += inflow

                while t_next <= t + 1:
                    need = rate_bits * ((t_next + arrival_interval - 1) // arrival_interval)
                    if need > d_cum:
                        break
                    if warmup <= t_next < sample_end:
                        w = t + 1 - t_next
                        hist[w if w <= tail else tail + 1] += 1
                        wsum += w
                        samples += 1
                    t_next += 1

                if warmup <= t < sample_end:
                    total_q = 0.0
                    for link in range(n):
                        total_q += q[link]
                    backlog_sum += total_q
                    gap_sum += arrived - d_cum
                    if total_q > backlog_limit:
                        diverged = True
                        break

        steps_run = t + 1 if steps > 0 else 0
        if not diverged:
            pending = sample_end - (t_next if t_next > warmup else warmup)
            if pending > 0:
                hist[tail + 1] += pending
                wsum += (tail + 1) * pending
                samples += pending
        out_hist = [hist[w] for w in range(tail + 2)]
    finally:
        free(gb); free(q); free(hist)
    return out_hist, samples, wsum, backlog_sum, gap_sum, diverged, steps_run


def run_whart(seed, gbars, long long frame_bits, double rate_bits,
              long long steps, long long warmup, long long tail, double backlog_limit):
    """See hopbound.sim._pycore.run_whart."""
    cdef u64 cseed = <u64> seed
    cdef int n = len(gbars)
    cdef int link
    cdef long long t = 0, t_next = 1, w, sample_end = steps - tail
    cdef long long samples = 0, wsum = 0, pending
    cdef double d_cum = 0.0, arrived = 0.0, backlog_sum = 0.0, gap_sum = 0.0
    cdef double u, u2, snr, psucc, take, total_q, need
    cdef double cap = <double> frame_bits
    cdef double fbits = <double> frame_bits
    cdef bint diverged = False

    cdef double *gb = <double *> malloc(n * sizeof(double))
    cdef double *q = <double *> malloc(n * sizeof(double))
    cdef long long *hist = <long long *> malloc((tail + 2) * sizeof(long long))
    if gb == NULL or q == NULL or hist == NULL:
        free(gb); free(q); free(hist)
        raise MemoryError()
    for link in range(n):
        gb[link] = gbars[link]
        q[link] = 0.0
    for w in range(tail + 2):
        hist[w] = 0

    try:
        with nogil:
            for t in range(steps):
                q[0] += rate_bits
                arrived += rate_bits
                for link in range(n):
                    u = _u01(cseed, link, t, 0)
                    snr = -gb[link] * log(1.0 - u)
                    psucc = pow(1.0 - _ber(snr), fbits)
                    u2 = _u01(cseed, link, t, 1)
                    if u2 < psucc:
                        take = q[link] if q[link] < cap else cap
                        q[link] -= take
                        if link + 1 < n:
                            q[link + 1] += take
                        else:
                            d_cum += take

                while t_next <= t + 1:
                    need = rate_bits * t_next
                    if need > d_cum:
                        break
                    if warmup <= t_next < sample_end:
                        w = t + 1 - t_next
                        hist[w if w <= tail else tail + 1] += 1
                        wsum += w
                        samples += 1
                    t_next += 1

                if warmup <= t < sample_end:
                    total_q = 0.0
                    for link in range(n):
                        total_q += q[link]
                    backlog_sum += total_q
                    gap_sum += arrived - d_cum
                    if total_q > backlog_limit:
                        diverged = True
                        break

        steps_run = t + 1 if steps > 0 else 0
        if not diverged:
            pending = sample_end - (t_next if t_next > warmup else warmup)
            if pending > 0:
                hist[tail + 1] += pending
                wsum += (tail + 1) * pending
                samples += pending
        out_hist = [hist[w] for w in range(tail + 2)]
    finally:
        free(gb); free(q); free(hist)
    return out_hist, samples, wsum, backlog_sum, gap_sum, diverged, steps_run
