"""Radio medium primitives: 802.11b airtimes, frame errors, link quality, capture.

The PLCP preamble+header (24 bytes) always goes out at 1 Mbps, i.e. a flat
192 us on every frame; the MPDU then rides at one of the four 802.11b rates.
Airtimes are rounded up to the next microsecond so reservations never
undershoot.
"""

import math
from dataclasses import dataclass

PLCP_US = 192  # 24 bytes at 1 Mbps

# Mbps -> (num, den) with num/den = microseconds per payload byte.
_US_PER_BYTE = {
    1: (8, 1),
    2: (4, 1),
    5.5: (16, 11),
    11: (8, 11),
}

RATES = (1, 2, 5.5, 11)  # the four rows of the 802.11b rate table

# Modulation/coding labels for the four rates (CCK = Complementary Code Keying).
RATE_SPECS = {
    1: ("Barker", "BPSK"),
    2: ("Barker", "QPSK"),
    5.5: ("CCK", "QPSK"),
    11: ("CCK", "QPSK"),
}

# Link quality states, ordered worst to best.
BAD, LOW, MID, HIGH = 0, 1, 2, 3
QUALITY_NAMES = ("BAD", "LOW", "MID", "HIGH")
QUALITY_BY_NAME = {n: i for i, n in enumerate(QUALITY_NAMES)}

# Highest rate each quality state can sustain; transmitting above it loses
# the frame outright.
MAX_RATE_FOR_QUALITY = {BAD: 1, LOW: 2, MID: 5.5, HIGH: 11}

# Default frame error rates at the 300-byte reference size, per quality state.
DEFAULT_BASE_FER = {BAD: 0.5, LOW: 0.1, MID: 0.02, HIGH: 0.005}
FER_BASE_SIZE = 300  # [bytes]

# Reception outcomes.
RECEIVED, COLLIDED, ERRORED, NOT_HEARD = "RECEIVED", "COLLIDED", "ERRORED", "NOT_HEARD"


def airtime(payload_bytes, rate):
    """Microseconds on the air for `payload_bytes` of MPDU at `rate` Mbps."""
    if rate not in _US_PER_BYTE:
        raise ValueError("unsupported rate %r" % (rate,))
    if payload_bytes < 0:
        raise ValueError("negative payload")
    num, den = _US_PER_BYTE[rate]
    return PLCP_US + -(-payload_bytes * num // den)  # ceil division


def frame_error_prob(payload_bytes, base_fer, base_size=FER_BASE_SIZE):
    """FER scaled from `base_fer` at `base_size`: doubles per 300 extra bytes."""
    if not 0.0 <= base_fer <= 1.0:
        raise ValueError("base_fer outside [0,1]")
    if base_fer == 0.0:
        return 0.0
    return min(1.0, base_fer * 2.0 ** ((payload_bytes - base_size) / 300.0))


def shannon_capacity(bandwidth_hz, snr):
    """Channel capacity B*log2(1+SNR) in bits per second."""
    if bandwidth_hz <= 0:
        raise ValueError("bandwidth must be positive")
    if snr < 0:
        raise ValueError("snr must be non-negative")
    return bandwidth_hz * math.log2(1.0 + snr)


@dataclass
class Topology:
    """Node positions plus hearing/sensing ranges (sense >= hear, symmetric)."""

    positions: dict  # node id -> (x, y) in meters
    hear_range: float
    sense_range: float

    def __post_init__(self):
        if self.sense_range < self.hear_range:
            raise ValueError("sense_range must be >= hear_range")

    def distance(self, a, b):
        ax, ay = self.positions[a]
        bx, by = self.positions[b]
        return math.hypot(ax - bx, ay - by)

    def can_hear(self, a, b):
        return a != b and self.distance(a, b) <= self.hear_range

    def can_sense(self, a, b):
        return a != b and self.distance(a, b) <= self.sense_range

    def received_power(self, sender, receiver):
        """Unit transmit power over distance squared; used by the capture rule."""
        d = self.distance(sender, receiver)
        if d <= 0:
            return float("inf")
        return 1.0 / (d * d)


class LinkQualityProcess:
    """Per-ordered-link 4-state Markov chain stepped every `dwell_us`.

    A dwell of 0 (or an identity matrix) keeps the links static.  Each link
    advances with a draw from the owning simulation's dedicated stream, so
    fading is reproducible per seed.
    """

    def __init__(self, node_ids, initial_state, matrix=None, dwell_us=0):
        self.states = {}
        for a in node_ids:
            for b in node_ids:
                if a != b:
                    self.states[(a, b)] = initial_state
        self.matrix = matrix
        self.dwell_us = dwell_us
        if matrix is not None:
            validate_matrix(matrix)

    def state(self, sender, receiver):
        return self.states[(sender, receiver)]

    def step(self, stream):
        """Advance every link one Markov step (no-op without a matrix)."""
        if self.matrix is None:
            return
        for link in sorted(self.states):
            row = self.matrix[self.states[link]]
            u = stream.uniform()
            acc = 0.0
            nxt = len(row) - 1
            for j, p in enumerate(row):
                acc += p
                if u < acc:
                    nxt = j
                    break
            self.states[link] = nxt


def validate_matrix(matrix):
    if len(matrix) != 4 or any(len(row) != 4 for row in matrix):
        raise ValueError("transition matrix must be 4x4")
    for i, row in enumerate(matrix):
        if any(p < 0 for p in row):
            raise ValueError("negative probability in row %d" % i)
        if abs(sum(row) - 1.0) > 1e-9:
            raise ValueError("row %d does not sum to 1" % i)


def resolve_capture(candidates, powers, capture_ratio):
    """Pick the index captured out of >=2 overlapping transmissions, or None.

    `candidates` are (start_us, ...) records aligned with `powers`.  The
    strongest wins only if its power beats the sum of the rest by the capture
    ratio AND it started no later than every other overlapping transmission
    (preamble capture).
    """
    strongest = max(range(len(powers)), key=lambda i: powers[i])
    rest = sum(p for i, p in enumerate(powers) if i != strongest)
    if rest > 0 and powers[strongest] < capture_ratio * rest:
        return None
    s_start = candidates[strongest][0]
    if any(candidates[i][0] < s_start for i in range(len(candidates)) if i != strongest):
        return None
    return strongest
