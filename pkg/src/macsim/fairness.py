"""Fairness machinery: MILD backoff, throughput-estimation backoff, SCFQ/DFS.

The SCFQ oracle is a centralized reference scheduler used to check that the
distributed backoff mapping reproduces the same medium-access order when
collisions and randomization are switched off.
"""

import math
from dataclasses import dataclass, field

MILD_FACTOR = 1.5
EST_WINDOW_US = 100_000


def mild_update(cw, collided, factor=MILD_FACTOR, cw_min=16, cw_max=256):
    """MACAW backoff: multiply on collision, decrement by one on success."""
    if collided:
        return min(int(round(cw * factor)), cw_max)
    return max(cw - 1, cw_min)


def share_cw_on_hear(local_cw, advertised_cw):
    """MACAW copies the advertised window outright (copy, not max)."""
    return advertised_cw


def fairness_index(shares, throughputs, worst_pair=True):
    """Pairwise min/max ratio of share-normalized throughputs.

    Equation as typeset is ambiguous between the worst pair and the best
    pair; `worst_pair=True` (default) reports the worst, which is the reading
    consistent with maximizing the index toward 1.
    """
    if len(shares) != len(throughputs) or len(shares) < 2:
        raise ValueError("need matching share/throughput vectors of length >= 2")
    if any(p <= 0 for p in shares):
        raise ValueError("shares must be positive")
    if all(w == 0 for w in throughputs):
        raise ValueError("fairness index undefined when all throughputs are zero")
    norm = [w / p for w, p in zip(throughputs, shares)]
    if worst_pair:
        return min(norm) / max(norm)
    best = 0.0
    for i in range(len(norm)):
        for j in range(i + 1, len(norm)):
            lo, hi = sorted((norm[i], norm[j]))
            best = max(best, lo / hi if hi > 0 else 0.0)
    return best


@dataclass
class TrafficEstimate:
    """Sliding-window byte counters: own acked traffic vs snooped neighbours."""

    window_us: int = EST_WINDOW_US
    _own: list = field(default_factory=list)  # (time_us, bits)
    _others: list = field(default_factory=list)

    def note_own(self, now, bits):
        self._own.append((now, bits))

    def note_others(self, now, bits):
        self._others.append((now, bits))

    def _prune(self, now):
        cutoff = now - self.window_us
        self._own = [e for e in self._own if e[0] >= cutoff]
        self._others = [e for e in self._others if e[0] >= cutoff]

    def w_self(self, now):
        self._prune(now)
        return sum(b for _, b in self._own)

    def w_others(self, now):
        self._prune(now)
        return sum(b for _, b in self._others)


def estimation_backoff_update(cw, w_self, w_others, phi_self, cw_min=16, cw_max=256):
    """Double the window when above fair share, halve when below, hold on a tie."""
    if not 0.0 < phi_self < 1.0:
        raise ValueError("phi_self must be in (0,1)")
    mine = w_self / phi_self
    theirs = w_others / (1.0 - phi_self)
    if mine > theirs:
        return min(2 * cw, cw_max)
    if mine < theirs:
        return max(cw // 2, cw_min)
    return cw


class ScfqTags:
    """Per-flow finish-tag memory plus the oracle's virtual clock."""

    def __init__(self, shares):
        self.shares = dict(shares)  # flow id -> phi
        self.prev_finish = {f: 0.0 for f in shares}
        self.v = 0.0

    def assign(self, flow, length_bits, arrival_v):
        """Stamp one packet: S = max(v(A), F_prev); F = S + L/phi."""
        phi = self.shares[flow]
        if phi <= 0:
            raise ValueError("share must be positive")
        start = max(arrival_v, self.prev_finish[flow])
        finish = start + length_bits / phi
        self.prev_finish[flow] = finish
        return start, finish


def scfq_oracle(flows):
    """Centralized SCFQ schedule over `flows`: {flow id: [L_bits, ...]}.

    All packets are taken as arrived at t=0 in list order.  Returns the flow
    id sequence in transmission order; ties in finish tags break by flow id,
    then arrival order (which queue order already encodes).
    """
    tags = ScfqTags({f: phi for f, (phi, _) in flows.items()})
    queues = {}
    for f, (phi, lengths) in sorted(flows.items()):
        q = []
        for length in lengths:
            q.append(tags.assign(f, length, 0.0))
        queues[f] = q
    order = []
    while any(queues.values()):
        pick = min((q[0][1], f) for f, q in sorted(queues.items()) if q)
        _, f = pick
        _, finish = queues[f].pop(0)
        tags.v = finish
        order.append(f)
    return order


def dfs_backoff(length_bits, phi, scaling, stream=None, compress_threshold=None):
    """First-attempt DFS backoff in slots.

    floor(scaling * L / phi), randomized by a mean-1 uniform multiplier on
    [0.5, 1.5] when a stream is given, then compressed above the threshold by
    threshold + floor(threshold * log2(B / threshold)).  The compression map
    is continuous at the threshold and monotone.
    """
    if phi <= 0 or scaling <= 0:
        raise ValueError("phi and scaling must be positive")
    b = int(scaling * length_bits / phi)
    if stream is not None:
        b = int(b * (0.5 + stream.uniform()))
    if compress_threshold is not None and b > compress_threshold:
        b = compress_threshold + int(
            compress_threshold * math.log2(b / compress_threshold))
    return b
