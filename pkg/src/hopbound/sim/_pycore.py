"""Pure-Python simulation engines (reference implementation).

The Cython module hopbound.sim._core mirrors these loops statement for
statement; both draw from the same counter-based generator and must produce
bit-identical results.  Keep any change here in sync with _core.pyx.

Time is slotted.  Queues are FCFS with infinite buffers; service within a
step runs in link order, so freshly forwarded bits can traverse several hops
in the same step (matching the cascade service model, where a hop may
contribute a zero-length interval).

Per-step virtual delay: with A(0,t) the bits arrived before step t and
D(0,t) the bits departed, W(t) = min{i >= 0 : D(0, t+i) >= A(0, t)}.  The
engine resolves W online with a catch-up pointer and returns a histogram of
W over the sampling window (one sample per step; entries beyond the window
tail are censored into the last bin, which still exceeds every target).
"""

import math

_MASK64 = (1 << 64) - 1
_INV_2POW53 = 1.0 / 9007199254740992.0

_LINK_KEY = 0xA24BAED4963EE407
_STEP_KEY = 0x9FB21C651E98DF25
_SUB_KEY = 0xD6E8FEB86659FD93

# O-QPSK DSSS BER series constants; signs folded into the binomials.
BER_TERMS = tuple(
    ((1.0 if k % 2 == 0 else -1.0) * math.comb(16, k), 20.0 * (1.0 / k - 1.0))
    for k in range(2, 17)
)
BER_SCALE = (8.0 / 15.0) * (1.0 / 16.0)


def _mix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def uniform01(seed: int, link: int, step: int, sub: int) -> float:
    """Counter-based draw in [0, 1), keyed by (seed, link, step, substream)."""
    x = seed & _MASK64
    x = _mix64(x ^ (((link + 1) * _LINK_KEY) & _MASK64))
    x = _mix64(x ^ (((step + 1) * _STEP_KEY) & _MASK64))
    x = _mix64(x ^ (((sub + 1) * _SUB_KEY) & _MASK64))
    return (x >> 11) * _INV_2POW53


def _ber(snr: float) -> float:
    acc = 0.0
    for coef, expo in BER_TERMS:
        acc += coef * math.exp(expo * snr)
    b = BER_SCALE * acc
    return b if b > 0.0 else 0.0


def run_fluid(seed: int, gbars, cnat: float, rate_bits: float, arrival_interval: int,
              steps: int, warmup: int, tail: int, backlog_limit: float):
    """Fluid cascade with Shannon per-slot service; returns delay statistics.

    Returns (hist, samples, wsum, backlog_sum, gap_sum, diverged, steps_run):
    hist[v] counts sampled steps with W == v for v <= tail, hist[tail+1]
    counts censored samples (W > tail).
    """
    n = len(gbars)
    q = [0.0] * n
    d_cum = 0.0
    hist = [0] * (tail + 2)
    sample_end = steps - tail
    samples = 0
    wsum = 0
    backlog_sum = 0.0
    gap_sum = 0.0
    t_next = 1  # W(0) = 0 by definition; never inside the window (warmup >= 1)
    arrived = 0.0
    diverged = False
    log = math.log
    log1p = math.log1p

    for t in range(steps):
        if t % arrival_interval == 0:
            q[0] += rate_bits
            arrived += rate_bits
        inflow = 0.0
        for link in range(n):
            u = uniform01(seed, link, t, 0)
            snr = -gbars[link] * log(1.0 - u)
            cap = cnat * log1p(snr)
            q[link] += inflow
            take = q[link] if q[link] < cap else cap
            q[link] -= take
            inflow = take
        d_cum += inflow

        # resolve virtual delays that this step's departures complete
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
            for v in q:
                total_q += v
            backlog_sum += total_q
            gap_sum += arrived - d_cum
            if total_q > backlog_limit:
                diverged = True
                break

    steps_run = t + 1 if steps > 0 else 0
    # anything still unresolved in the window violated every target
    if not diverged:
        pending = sample_end - max(t_next, warmup)
        if pending > 0:
            hist[tail + 1] += pending
            wsum += (tail + 1) * pending
            samples += pending
    return hist, samples, wsum, backlog_sum, gap_sum, diverged, steps_run


def run_whart(seed: int, gbars, frame_bits: int, rate_bits: float,
              steps: int, warmup: int, tail: int, backlog_limit: float):
    """Round-robin superframe cascade moving whole frames on Bernoulli success.

    One step is one superframe: slot k serves link k, transferring up to
    frame_bits bits when the frame check passes, with per-slot success
    probability (1 - BER(snr))^frame_bits at the slot's fading SNR.  Arrivals
    are rate_bits at each superframe start.  Returns the same tuple as
    run_fluid, with delays in superframes.
    """
    n = len(gbars)
    q = [0.0] * n
    d_cum = 0.0
    hist = [0] * (tail + 2)
    sample_end = steps - tail
    samples = 0
    wsum = 0
    backlog_sum = 0.0
    gap_sum = 0.0
    t_next = 1
    arrived = 0.0
    diverged = False
    log = math.log
    pow_ = math.pow
    cap = float(frame_bits)
    fbits = float(frame_bits)

    for t in range(steps):
        q[0] += rate_bits
        arrived += rate_bits
        for link in range(n):
            u = uniform01(seed, link, t, 0)
            snr = -gbars[link] * log(1.0 - u)
            psucc = pow_(1.0 - _ber(snr), fbits)
            u2 = uniform01(seed, link, t, 1)
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
            for v in q:
                total_q += v
            backlog_sum += total_q
            gap_sum += arrived - d_cum
            if total_q > backlog_limit:
                diverged = True
                break

    steps_run = t + 1 if steps > 0 else 0
    if not diverged:
        pending = sample_end - max(t_next, warmup)
        if pending > 0:
            hist[tail + 1] += pending
            wsum += (tail + 1) * pending
            samples += pending
    return hist, samples, wsum, backlog_sum, gap_sum, diverged, steps_run
