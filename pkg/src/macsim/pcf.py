"""Point coordination: beacon-delimited contention-free periods with polling.

The point coordinator (PC) splits time into superframes.  Each one opens
with a beacon sent after a PIFS of idle air, whose duration field silences
contention until the contention-free period (CFP) would end at the latest.
The PC then polls stations round-robin, one response per poll, recovering
with a PIFS timeout when a polled station stays silent, and closes the CFP
early with a CF-END once everyone had a turn or the time budget runs out.
The polling position carries over between superframes, and the contention
period (CP) that fills the rest of the superframe runs plain DCF.
"""

from .frames import (BEACON, BROADCAST, CF_END, CF_POLL, BEACON_BYTES,
                     CF_END_BYTES, CF_POLL_BYTES, Frame, control_airtime)
from .phy import airtime

POLL_AIR = control_airtime(CF_POLL_BYTES)
BEACON_AIR = control_airtime(BEACON_BYTES)
CF_END_AIR = control_airtime(CF_END_BYTES)

# Coordinator states.
_OFF = "off"
_WAIT_BEACON = "wait_beacon"  # waiting for PIFS of idle air at the boundary
_POLLING = "polling"  # between poll steps
_WAIT_RESPONSE = "wait_response"  # poll sent, PIFS silence timer armed
_IN_RESPONSE = "in_response"  # carrier went up; waiting for it to drop
_CP = "cp"  # contention period until the next boundary


def min_cp_us(params, max_bytes, rate):
    """Shortest CP that always fits one worst-case four-way exchange."""
    from .frames import RTS_AIR, CTS_AIR, ACK_AIR
    return (params.difs_us + (params.cw_max - 1) * params.slot_us
            + RTS_AIR + CTS_AIR + airtime(max_bytes, rate) + ACK_AIR
            + 3 * params.sifs_us)


class PointCoordinator:
    """Attach to the PC node's MacNode; drives CFP timing off its carrier sense."""

    def __init__(self, mac, pollable, superframe_us, cfp_max_us, cp_min_us,
                 data_rate=11):
        if not pollable:
            raise ValueError("need at least one pollable station")
        if cfp_max_us + cp_min_us > superframe_us:
            raise ValueError(
                "cfp_max %d + cp_min %d exceeds superframe %d"
                % (cfp_max_us, cp_min_us, superframe_us))
        floor = min_cp_us(mac.params, mac.params.frag_threshold, data_rate)
        if cp_min_us < floor:
            raise ValueError(
                "cp_min %d below the %d us needed for one full exchange"
                % (cp_min_us, floor))
        self.mac = mac
        self.sim = mac.sim
        self.pollable = list(pollable)
        self.superframe_us = superframe_us
        self.cfp_max_us = cfp_max_us
        self.cp_min_us = cp_min_us
        self.data_rate = data_rate
        self.pos = 0  # round-robin cursor, persists across superframes
        self.state = _OFF
        self.cfp_end = 0
        self._polled = 0
        self._timer = None
        self._boundary = 0
        mac.pcf = self

    def start(self):
        self._boundary = self.sim.now
        self.sim.schedule(self._boundary, "cfp_boundary", self.mac.node_id,
                          self._on_boundary)

    # -- superframe boundary / beacon ---------------------------------------

    def _on_boundary(self):
        self.cfp_end = self.sim.now + self.cfp_max_us
        self._polled = 0
        self.state = _WAIT_BEACON
        self._boundary += self.superframe_us
        self.sim.schedule(self._boundary, "cfp_boundary", self.mac.node_id,
                          self._on_boundary)
        self._try_beacon()

    def _try_beacon(self):
        if self.mac.sense_count == 0 and not self.mac.self_tx:
            self._timer = self.sim.schedule_in(
                self.mac.params.pifs_us, "beacon_pifs", self.mac.node_id,
                self._send_beacon)

    def _send_beacon(self):
        self._timer = None
        end = self.sim.now + BEACON_AIR
        frame = Frame(BEACON, self.mac.node_id, BROADCAST,
                      duration=max(0, self.cfp_end - end),
                      payload_bytes=BEACON_BYTES)
        self.state = _POLLING
        self.mac._transmit(frame, 1, self._schedule_next_poll)

    def _schedule_next_poll(self):
        self.sim.schedule_in(self.mac.params.sifs_us, "cf_poll_gap",
                             self.mac.node_id, self._next_poll)

    # -- polling loop --------------------------------------------------------

    def _next_poll(self):
        if self.state != _POLLING:
            return
        worst = (POLL_AIR + airtime(self.mac.params.frag_threshold,
                                    self.data_rate)
                 + 2 * self.mac.params.sifs_us + self.mac.params.pifs_us)
        if self._polled >= len(self.pollable) \
                or self.sim.now + worst + CF_END_AIR > self.cfp_end:
            self._send_cf_end()
            return
        target = self.pollable[self.pos]
        self.pos = (self.pos + 1) % len(self.pollable)
        self._polled += 1
        poll = Frame(CF_POLL, self.mac.node_id, target,
                     payload_bytes=CF_POLL_BYTES)
        self.state = _WAIT_RESPONSE
        self.mac._transmit(poll, 1, self._arm_silence_timer)

    def _arm_silence_timer(self):
        self._timer = self.sim.schedule_in(
            self.mac.params.pifs_us, "poll_timeout", self.mac.node_id,
            self._on_poll_timeout)

    def _on_poll_timeout(self):
        self._timer = None
        self.sim.trace(self.mac.node_id, "poll_silent", "")
        self.state = _POLLING
        self._next_poll()

    def _send_cf_end(self):
        frame = Frame(CF_END, self.mac.node_id, BROADCAST,
                      payload_bytes=CF_END_BYTES)
        self.state = _CP
        self.sim.trace(self.mac.node_id, "cf_end",
                       "polled=%d" % self._polled)
        self.mac._transmit(frame, 1)

    # -- carrier-sense hooks from the owning MacNode -------------------------

    def on_sense_enter(self):
        if self.state == _WAIT_BEACON and self._timer is not None:
            self._timer.cancel()
            self._timer = None
        elif self.state == _WAIT_RESPONSE:
            if self._timer is not None:
                self._timer.cancel()
                self._timer = None
            self.state = _IN_RESPONSE

    def on_sense_exit(self):
        if self.mac.sense_count != 0:
            return
        if self.state == _WAIT_BEACON and self._timer is None:
            self._try_beacon()
        elif self.state == _IN_RESPONSE:
            self.state = _POLLING
            self._schedule_next_poll()

    def on_frame(self, frame):
        pass  # polling progress is carrier-driven; frames need no handling
