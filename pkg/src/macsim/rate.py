"""Rate-selection schemes layered on DCF: ARF, RBAR and OAR.

ARF is sender-side and result-driven; RBAR lets the receiver pick the rate
during the RTS/CTS exchange; OAR extends RBAR with multi-packet bursts under
the fragmentation mechanism, bounded so a burst never holds the channel
longer than one maximum-size packet at the base rate.
"""

from dataclasses import dataclass, field

from . import phy
from .phy import RATES, airtime

BASE_RATE = 2  # Mbps; 802.11b base rate anchoring OAR's temporal fairness

ARF_UP_AFTER = 10  # consecutive successes before stepping up
ARF_TIMER_US = 60_000  # recovery timer default


def _step(rate, delta):
    i = RATES.index(rate) + delta
    return RATES[max(0, min(len(RATES) - 1, i))]


@dataclass
class ArfState:
    current_rate: float = 11
    consecutive_successes: int = 0
    consecutive_failures: int = 0
    recovery_deadline: int = -1  # [us]; -1 = no timer running
    just_upgraded: bool = False
    timer_us: int = ARF_TIMER_US


def arf_current_rate(state, now):
    """Rate for the next attempt; an expired recovery timer probes one step up."""
    if state.recovery_deadline >= 0 and now >= state.recovery_deadline:
        state.recovery_deadline = -1
        if state.current_rate != RATES[-1]:
            state.current_rate = _step(state.current_rate, +1)
            state.just_upgraded = True
            state.consecutive_successes = 0
            state.consecutive_failures = 0
    return state.current_rate


def arf_on_result(state, acked, now):
    """Update ARF after a data transmission attempt; returns the next rate.

    First missed ACK retries at the same rate; the second steps down and arms
    the recovery timer.  Ten straight successes step up; a failure right after
    an upgrade steps straight back down.
    """
    if acked:
        state.consecutive_failures = 0
        state.consecutive_successes += 1
        state.just_upgraded = False
        if (state.consecutive_successes >= ARF_UP_AFTER
                and state.current_rate != RATES[-1]):
            state.current_rate = _step(state.current_rate, +1)
            state.consecutive_successes = 0
            state.just_upgraded = True
            state.recovery_deadline = -1
    else:
        state.consecutive_successes = 0
        state.consecutive_failures += 1
        if state.just_upgraded:
            state.current_rate = _step(state.current_rate, -1)
            state.just_upgraded = False
            state.consecutive_failures = 0
            state.recovery_deadline = now + state.timer_us
        elif state.consecutive_failures >= 2:
            state.current_rate = _step(state.current_rate, -1)
            state.consecutive_failures = 0
            state.recovery_deadline = now + state.timer_us
    return state.current_rate


# Receiver-side rate choice: quality state -> highest sustainable rate.
def rbar_select_rate(quality_state):
    return phy.MAX_RATE_FOR_QUALITY[quality_state]


def rbar_needs_rsh(tentative, selected):
    """A reservation sub-header is needed whenever the receiver changed the rate."""
    return selected != tentative


def oar_burst_len(selected, base=BASE_RATE):
    """Packets per burst: floor of sending rate over base rate, at least one."""
    if base <= 0:
        raise ValueError("base rate must be positive")
    return max(1, int(selected / base))


def oar_cap_burst(n, packet_bytes, rate, ref_bytes, base=BASE_RATE):
    """Trim a burst so its data airtime stays within one max-size packet at base rate."""
    cap = airtime(ref_bytes, base)
    while n > 1 and n * airtime(packet_bytes, rate) > cap:
        n -= 1
    return n


def oar_mark_burst(frames):
    """Set more_fragments on all but the last; zero every fragment number.

    Receivers keep defragmentation disabled for these, so each frame stands
    alone as a packet.
    """
    if len({f.dst for f in frames}) > 1:
        raise ValueError("OAR burst must target a single destination")
    for i, f in enumerate(frames):
        f.more_fragments = 1 if i < len(frames) - 1 else 0
        f.fragment_number = 0
    return frames
