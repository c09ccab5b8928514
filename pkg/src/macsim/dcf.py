"""DCF building blocks: contention window arithmetic, backoff, NAV, fragmentation.

The stateful channel-access machine lives in mac.py; everything here is a
pure function so the rules can be tested in isolation.
"""

from dataclasses import dataclass

SUCCESS = "SUCCESS"
FAILURE = "FAILURE"

CW_MIN = 16
CW_MAX = 256
RETRY_LIMIT = 7

# Default 802.11b timing [us]; scenarios may override.
SLOT_US = 20
SIFS_US = 10
PIFS_US = SIFS_US + SLOT_US
DIFS_US = SIFS_US + 2 * SLOT_US


@dataclass
class MacParams:
    slot_us: int = SLOT_US
    sifs_us: int = SIFS_US
    cw_min: int = CW_MIN
    cw_max: int = CW_MAX
    retry_limit: int = RETRY_LIMIT
    rts_threshold: int = 500  # bytes; >= threshold uses RTS/CTS
    frag_threshold: int = 1500  # bytes

    @property
    def pifs_us(self):
        return self.sifs_us + self.slot_us

    @property
    def difs_us(self):
        return self.sifs_us + 2 * self.slot_us


def cw_after(cw, outcome, cw_min=CW_MIN, cw_max=CW_MAX):
    """Binary exponential backoff: double on failure (capped), reset on success."""
    if outcome == FAILURE:
        return min(2 * cw, cw_max)
    if outcome == SUCCESS:
        return cw_min
    raise ValueError("unknown outcome %r" % (outcome,))


def draw_backoff(cw, stream):
    """Uniform slot count in [0, cw-1]."""
    if cw < 1:
        raise ValueError("cw must be >= 1")
    return stream.uniform_int(0, cw - 1)


def nav_merge(nav_until, heard_duration, now):
    """NAV only ever extends; a shorter overheard reservation cannot shrink it."""
    return max(nav_until, now + heard_duration)


def should_use_rts(payload_bytes, rts_threshold):
    """RTS/CTS kicks in at the threshold (boundary inclusive)."""
    return payload_bytes >= rts_threshold


def fragment_plan(payload_bytes, frag_threshold):
    """Split a payload into (size, more_fragments, fragment_number) tuples."""
    if frag_threshold < 1:
        raise ValueError("frag_threshold must be >= 1")
    plan = []
    remaining = payload_bytes
    number = 0
    while remaining > frag_threshold:
        plan.append((frag_threshold, 1, number))
        remaining -= frag_threshold
        number += 1
    plan.append((remaining, 0, number))
    return plan
