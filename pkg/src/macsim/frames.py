"""MAC frame model and duration arithmetic shared by every variant."""

from dataclasses import dataclass, field

from .phy import airtime

# Frame kinds.
RTS = "RTS"
CTS = "CTS"
DATA = "DATA"
ACK = "ACK"
BEACON = "BEACON"
CF_POLL = "CF_POLL"
CF_ACK = "CF_ACK"
CF_END = "CF_END"
DATA_CF_ACK = "DATA_CF_ACK"

# Control frame MPDU sizes [bytes]; always transmitted at 1 Mbps so every
# neighbour can decode the duration field.
RTS_BYTES = 20
CTS_BYTES = 14
ACK_BYTES = 14
CF_POLL_BYTES = 20
CF_END_BYTES = 20
BEACON_BYTES = 50
RSH_BYTES = 10  # RBAR reservation sub-header, prepended at 1 Mbps

CONTROL_RATE = 1  # Mbps

BROADCAST = -1

CONTROL_KINDS = {RTS, CTS, ACK, BEACON, CF_POLL, CF_ACK, CF_END}


def control_airtime(bytes_):
    return airtime(bytes_, CONTROL_RATE)


RTS_AIR = control_airtime(RTS_BYTES)
CTS_AIR = control_airtime(CTS_BYTES)
ACK_AIR = control_airtime(ACK_BYTES)


@dataclass
class Frame:
    kind: str
    src: int
    dst: int
    duration: int = 0  # NAV value [us]
    payload_bytes: int = 0
    more_fragments: int = 0
    fragment_number: int = 0
    retry: int = 0
    # Simulator-internal bookkeeping (packet identity for dedup/metrics,
    # exchange id so NAV corrections can target the right reservation).
    packet_id: int = -1
    flow_id: int = -1
    xid: int = -1
    # Variant extension fields.
    tentative_rate: float = 0.0  # RBAR, on RTS
    selected_rate: float = 0.0  # RBAR, on CTS
    size: int = 0  # RBAR/OAR, advertised data bytes
    nframes: int = 1  # OAR, advertised burst length
    rsh: int = 0  # RBAR reservation sub-header present on DATA
    adv_cw: int = 0  # MACAW shared contention window (0 = absent)

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("negative duration")


def frame_airtime(frame, rate):
    """Time on air, including the RSH prefix when present."""
    t = airtime(frame.payload_bytes, rate)
    if frame.rsh:
        t += RSH_BYTES * 8  # prefix rides at 1 Mbps, no second preamble
    return t
