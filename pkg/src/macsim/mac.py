"""Per-node MAC machine: carrier sense, slotted backoff, handshakes, variants.

One MacNode runs one or more access categories (plain DCF is the
single-category special case, which is what makes the EDCF trace-equivalence
property hold by construction).  Rate adaptation, fairness backoff policies
and the DCF+/ICA extensions hang off small hook points rather than separate
state machines, so every variant shares the same timing skeleton.
"""

from collections import deque
from dataclasses import dataclass, field

from . import dcf, ext, fairness, rate as rate_mod
from .dcf import MacParams
from .engine import RandomStream
from .frames import (ACK, ACK_AIR, ACK_BYTES, BEACON, BROADCAST, CF_ACK,
                     CF_POLL, CF_END, CTS, CTS_AIR, CTS_BYTES, DATA,
                     DATA_CF_ACK, RTS, RTS_AIR, RTS_BYTES, Frame,
                     frame_airtime)
from .phy import airtime

IDLE = "idle"
AWAIT_CTS = "await_cts"
AWAIT_ACK = "await_ack"
DCFP_WAIT_CTS = "dcfp_wait_cts"  # data receiver offered a piggyback, waits CTS
DCFP_WAIT_REV = "dcfp_wait_rev"  # data sender granted it, waits reverse DATA
ICA_WINDOW = "ica_window"


@dataclass
class Packet:
    pid: int
    flow_id: int
    src: int
    dst: int
    size: int  # [bytes]
    created: int  # [us]
    remaining: int = 0
    next_frag: int = 0

    def __post_init__(self):
        self.remaining = self.size

    @property
    def offset(self):
        return self.size - self.remaining


class AccessCategory:
    """Backoff instance plus queue for one traffic category."""

    def __init__(self, index, aifs_us, pf, cw_min, cw_max):
        self.index = index
        self.aifs_us = aifs_us
        self.pf = pf
        self.cw_min = cw_min
        self.cw_max = cw_max
        self.cw = cw_min
        self.queue = deque()
        self.backoff_slots = None  # None = draw before next arm
        self.retry_count = 0
        self.timer = None
        self.count_start = 0  # reference instant for consumed-slot arithmetic
        self.ready_time = 0


class _ChainElem:
    __slots__ = ("packet", "size", "mf", "fragno", "standalone")

    def __init__(self, packet, size, mf, fragno, standalone=0):
        self.packet = packet
        self.size = size
        self.mf = mf
        self.fragno = fragno
        self.standalone = standalone


class MacNode:
    def __init__(self, sim, medium, node_id, params=None, seed=0,
                 fixed_rate=11, rate_policy="fixed", cw_policy="beb",
                 dcfplus=False, ica=False, categories=None,
                 mild_factor=fairness.MILD_FACTOR, est_phi=0.5,
                 est_window_us=fairness.EST_WINDOW_US,
                 dfs_phi=1.0, dfs_scaling=1.0, dfs_random=True,
                 dfs_compress=None, arf_timer_us=rate_mod.ARF_TIMER_US,
                 oar_ref_bytes=2304, ica_cts_timeout_us=None, recorder=None):
        self.sim = sim
        self.medium = medium
        self.node_id = node_id
        self.params = params or MacParams()
        self.rng = RandomStream(seed, node_id)
        self.recorder = recorder

        self.fixed_rate = fixed_rate
        self.rate_policy = rate_policy
        self.cw_policy = cw_policy
        self.dcfplus = dcfplus
        self.ica_enabled = ica
        self.ica_cts_timeout_us = ica_cts_timeout_us
        self.mild_factor = mild_factor
        self.est_phi = est_phi
        self.estimate = fairness.TrafficEstimate(est_window_us)
        self.dfs_phi = dfs_phi
        self.dfs_scaling = dfs_scaling
        self.dfs_random = dfs_random
        self.dfs_compress = dfs_compress
        self.oar_ref_bytes = oar_ref_bytes
        self.arf = rate_mod.ArfState(current_rate=fixed_rate, timer_us=arf_timer_us)
        self.last_selected = fixed_rate  # RBAR tentative rate memory
        self.last_tentative = fixed_rate

        if categories:
            self.cats = categories
        else:
            p = self.params
            self.cats = [AccessCategory(0, p.difs_us, 2.0, p.cw_min, p.cw_max)]

        # Channel state.
        self.sense_count = 0
        self.self_tx = False
        self.nav_until = 0
        self.nav_xid = -1
        self._nav_event = None
        self.idle_since = 0

        # Exchange state.
        self.phase = IDLE
        self._chain = None
        self._chain_idx = 0
        self._cur_cat = None
        self._timer = None
        self._data_rate = fixed_rate
        self._xid = -1
        self._next_xid = node_id * 1_000_000
        self._quiet_peer = None  # DCF+ bookkeeping
        self._dcfp_packet = None

        # ICA state.
        self.ica = ext.IcaState()
        self._ica_timer = None
        self._ica_sizes = None

        # Receiver-side reassembly: (src, pid) -> {"ranges": set, "total": int}
        self._rx = {}

        # PCF coordinator hook (set externally for the point coordinator).
        self.pcf = None

        medium.register(self)

    # ------------------------------------------------------------------
    # channel state edges
    # ------------------------------------------------------------------

    def _virtually_idle(self):
        return (self.sense_count == 0 and not self.self_tx
                and self.nav_until <= self.sim.now)

    def on_sense_enter(self):
        was_idle = self._virtually_idle()
        self.sense_count += 1
        if was_idle:
            self._on_busy_edge()
        if self.pcf is not None:
            self.pcf.on_sense_enter()

    def on_sense_exit(self):
        self.sense_count -= 1
        if self._virtually_idle():
            self._on_idle_edge()
        if self.pcf is not None:
            self.pcf.on_sense_exit()

    def _set_self_tx(self):
        was_idle = self._virtually_idle()
        self.self_tx = True
        if was_idle:
            self._on_busy_edge()

    def _clear_self_tx(self):
        self.self_tx = False
        if self._virtually_idle():
            self._on_idle_edge()

    def set_nav(self, until, xid=-1, replace=False):
        now = self.sim.now
        if replace and xid == self.nav_xid:
            new = max(until, now)
        else:
            new = max(self.nav_until, until)
            if new == self.nav_until and self.nav_until > now:
                return
        was_idle = self._virtually_idle()
        self.nav_until = new
        self.nav_xid = xid
        if self._nav_event is not None:
            self._nav_event.cancel()
            self._nav_event = None
        if new > now:
            if was_idle:
                self._on_busy_edge()
            self._nav_event = self.sim.schedule(
                new, "nav_expiry", self.node_id, self._on_nav_expiry)

    def _on_nav_expiry(self):
        self._nav_event = None
        if self._virtually_idle():
            self._on_idle_edge()

    def _on_busy_edge(self):
        now = self.sim.now
        for cat in self.cats:
            if cat.timer is not None:
                if cat.timer.time == now:
                    continue  # same-slot decision already taken; let it fire
                elapsed = now - (cat.count_start + cat.aifs_us)
                consumed = max(0, elapsed // self.params.slot_us)
                cat.backoff_slots = max(0, cat.backoff_slots - consumed)
                cat.timer.cancel()
                cat.timer = None
        self.medium.pending_fire.pop(self.node_id, None)
        self.idle_since = None

    def _on_idle_edge(self):
        self.idle_since = self.sim.now
        self._arm_all()

    # ------------------------------------------------------------------
    # access arming
    # ------------------------------------------------------------------

    def _arm_all(self):
        if self.phase != IDLE or not self._virtually_idle():
            return
        for cat in self.cats:
            self._arm(cat)

    def _arm(self, cat):
        if cat.timer is not None or not cat.queue:
            return
        if self.phase != IDLE or not self._virtually_idle():
            return
        if self.idle_since is None:
            return
        if cat.backoff_slots is None:
            cat.backoff_slots = self._draw_backoff(cat)
        start = max(self.idle_since, cat.ready_time)
        cat.count_start = start
        fire = start + cat.aifs_us + cat.backoff_slots * self.params.slot_us
        fire = max(fire, self.sim.now)
        cat.timer = self.sim.schedule(fire, "access_fire", self.node_id,
                                      lambda c=cat: self._on_access_fire(c))
        if self.medium.genie_tiebreak:
            self.medium.pending_fire[self.node_id] = fire

    def _draw_backoff(self, cat):
        if self.cw_policy == "dfs" and cat.retry_count == 0:
            head = cat.queue[0]
            stream = self.rng if self.dfs_random else None
            return fairness.dfs_backoff(head.remaining * 8, self.dfs_phi,
                                        self.dfs_scaling, stream,
                                        self.dfs_compress)
        return dcf.draw_backoff(cat.cw, self.rng)

    def _on_access_fire(self, cat):
        cat.timer = None
        self.medium.pending_fire.pop(self.node_id, None)
        if self.medium.genie_defers(self.node_id, self.sim.now):
            cat.backoff_slots = 0
            return
        cat.backoff_slots = None
        # Virtual collision between this node's own categories.
        ready = [cat]
        for other in self.cats:
            if other is not cat and other.timer is not None \
                    and other.timer.time == self.sim.now:
                ready.append(other)
        if len(ready) > 1:
            winner = ext.edcf_pick_winner(ready)
            for loser in ready:
                if loser is winner:
                    continue
                loser.timer.cancel()
                loser.timer = None
                loser.cw = ext.edcf_expand_cw(loser.cw, loser.pf, loser.cw_max)
                loser.backoff_slots = dcf.draw_backoff(loser.cw, self.rng)
            self.sim.trace(self.node_id, "virtual_collision",
                           "winner=cat%d" % winner.index)
            if winner is not cat:
                return
        self._start_exchange(cat)

    # ------------------------------------------------------------------
    # sender sequencing
    # ------------------------------------------------------------------

    def _new_xid(self):
        self._next_xid += 1
        return self._next_xid

    def _pick_rate(self):
        if self.rate_policy == "arf":
            return rate_mod.arf_current_rate(self.arf, self.sim.now)
        if self.rate_policy in ("rbar", "oar"):
            return self.last_selected
        return self.fixed_rate

    def _build_chain(self, cat, data_rate):
        """Chain of DATA frames for this attempt, from the head of the queue."""
        head = cat.queue[0]
        p = self.params
        if self.rate_policy == "oar" and head.remaining <= p.frag_threshold:
            n = rate_mod.oar_burst_len(data_rate)
            n = rate_mod.oar_cap_burst(n, head.remaining, data_rate,
                                       self.oar_ref_bytes)
            burst = [head]
            for pkt in list(cat.queue)[1:]:
                if len(burst) >= n or pkt.dst != head.dst:
                    break
                burst.append(pkt)
            chain = [
                _ChainElem(pkt, pkt.remaining,
                           1 if i < len(burst) - 1 else 0, 0, standalone=1)
                for i, pkt in enumerate(burst)
            ]
            return chain
        plan = dcf.fragment_plan(head.remaining, p.frag_threshold)
        return [_ChainElem(head, size, mf, head.next_frag + i)
                for i, (size, mf, _n) in enumerate(plan)]

    def _start_exchange(self, cat):
        p = self.params
        self._cur_cat = cat
        self._data_rate = self._pick_rate()
        self.last_tentative = self._data_rate
        self._chain = self._build_chain(cat, self._data_rate)
        self._chain_idx = 0
        self._xid = self._new_xid()
        first = self._chain[0]
        if dcf.should_use_rts(first.size, p.rts_threshold):
            dur = (3 * p.sifs_us + CTS_AIR
                   + airtime(first.size, self._data_rate) + ACK_AIR)
            frame = Frame(RTS, self.node_id, first.packet.dst, duration=dur,
                          payload_bytes=RTS_BYTES, xid=self._xid)
            if self.rate_policy in ("rbar", "oar"):
                frame.tentative_rate = self._data_rate
                frame.size = first.size
                frame.nframes = len(self._chain)
            self.phase = AWAIT_CTS
            self._transmit(frame, 1, self._after_rts)
        else:
            self.phase = AWAIT_ACK
            self._send_chain_elem()

    def _after_rts(self):
        p = self.params
        self._timer = self.sim.schedule_in(
            p.sifs_us + CTS_AIR + p.slot_us, "cts_timeout", self.node_id,
            lambda: self._on_failure("cts"))

    def _on_cts(self, frame):
        self._cancel_timer()
        p = self.params
        if frame.selected_rate:
            self._data_rate = frame.selected_rate
            if self.rate_policy in ("rbar", "oar"):
                self.last_selected = frame.selected_rate
                if self.rate_policy == "oar":
                    self._chain = self._build_chain(self._cur_cat,
                                                    self._data_rate)
                    self._chain_idx = 0
        self.phase = AWAIT_ACK
        self.sim.schedule_in(p.sifs_us, "send_data", self.node_id,
                             self._send_chain_elem)

    def _send_chain_elem(self):
        p = self.params
        elem = self._chain[self._chain_idx]
        nxt = (self._chain[self._chain_idx + 1]
               if self._chain_idx + 1 < len(self._chain) else None)
        dur = p.sifs_us + ACK_AIR
        if nxt is not None:
            dur += 2 * p.sifs_us + airtime(nxt.size, self._data_rate) + ACK_AIR
        frame = Frame(DATA, self.node_id, elem.packet.dst, duration=dur,
                      payload_bytes=elem.size, more_fragments=elem.mf,
                      fragment_number=elem.fragno,
                      retry=1 if self._cur_cat.retry_count > 0 else 0,
                      packet_id=elem.packet.pid, flow_id=elem.packet.flow_id,
                      xid=self._xid, size=elem.packet.size)
        frame.frag_offset = elem.packet.offset
        frame.standalone = elem.standalone
        if self._chain_idx == 0 and self.rate_policy in ("rbar", "oar") \
                and rate_mod.rbar_needs_rsh(self.last_tentative, self._data_rate):
            frame.rsh = 1
        self._transmit(frame, self._data_rate, self._after_data)

    def _after_data(self):
        p = self.params
        self._timer = self.sim.schedule_in(
            p.sifs_us + ACK_AIR + p.slot_us, "ack_timeout", self.node_id,
            lambda: self._on_failure("ack"))

    def _on_ack(self, frame):
        self._cancel_timer()
        cat = self._cur_cat
        elem = self._chain[self._chain_idx]
        pkt = elem.packet
        pkt.remaining -= elem.size
        pkt.next_frag += 1
        cat.retry_count = 0
        self._cw_on_success(cat)
        if self.rate_policy == "arf":
            rate_mod.arf_on_result(self.arf, True, self.sim.now)
        self.estimate.note_own(self.sim.now, elem.size * 8)
        if pkt.remaining == 0 or elem.standalone:
            self._complete_packet(cat, pkt)
        self._chain_idx += 1
        if self._chain_idx < len(self._chain):
            self.sim.schedule_in(self.params.sifs_us, "send_data", self.node_id,
                                 self._send_chain_elem)
            return
        # Exchange over; DCF+ piggyback grant?
        if frame.duration > 0 and self.dcfplus:
            self._dcfp_grant(frame)
            return
        self._finish_exchange()

    def _complete_packet(self, cat, pkt):
        if pkt in cat.queue:
            cat.queue.remove(pkt)
        if self.recorder is not None:
            self.recorder.on_sender_done(pkt)
        cat.ready_time = self.sim.now

    def _finish_exchange(self):
        self.phase = IDLE
        self._chain = None
        self._cur_cat = None
        if self._virtually_idle():
            self._on_idle_edge()

    def _on_failure(self, kind):
        self._timer = None
        cat = self._cur_cat
        elem = self._chain[self._chain_idx]
        pkt = elem.packet
        self.sim.trace(self.node_id, "tx_fail", "%s pkt=%d" % (kind, pkt.pid))
        if self.rate_policy == "arf" and kind == "ack":
            rate_mod.arf_on_result(self.arf, False, self.sim.now)
        cat.retry_count += 1
        self._cw_on_failure(cat)
        if cat.retry_count > self.params.retry_limit:
            if pkt in cat.queue:
                cat.queue.remove(pkt)
            cat.retry_count = 0
            cat.cw = cat.cw_min
            if self.recorder is not None:
                self.recorder.on_drop(pkt)
                self.recorder.on_sender_done(pkt)  # keep backlogged sources fed
            self.sim.trace(self.node_id, "drop", "pkt=%d" % pkt.pid)
        cat.backoff_slots = dcf.draw_backoff(cat.cw, self.rng)
        cat.ready_time = self.sim.now
        self._finish_exchange()

    # -- contention-window policies ------------------------------------

    def _cw_on_success(self, cat):
        if self.cw_policy == "mild":
            cat.cw = fairness.mild_update(cat.cw, False, self.mild_factor,
                                          cat.cw_min, cat.cw_max)
        elif self.cw_policy == "est":
            self._est_update(cat)
        else:  # beb, dfs
            cat.cw = cat.cw_min

    def _cw_on_failure(self, cat):
        if self.cw_policy == "mild":
            cat.cw = fairness.mild_update(cat.cw, True, self.mild_factor,
                                          cat.cw_min, cat.cw_max)
        elif self.cw_policy == "est":
            self._est_update(cat)
        else:  # beb, dfs: binary exponential backoff for retransmissions
            cat.cw = dcf.cw_after(cat.cw, dcf.FAILURE, cat.cw_min, cat.cw_max)

    def _est_update(self, cat):
        now = self.sim.now
        cat.cw = fairness.estimation_backoff_update(
            cat.cw, self.estimate.w_self(now), self.estimate.w_others(now),
            self.est_phi, cat.cw_min, cat.cw_max)

    # ------------------------------------------------------------------
    # transmit helper
    # ------------------------------------------------------------------

    def _transmit(self, frame, rate, after=None):
        if self.cw_policy == "mild":
            frame.adv_cw = self.cats[0].cw
        self._set_self_tx()

        def on_end():
            self._clear_self_tx()
            if after is not None:
                after()

        return self.medium.transmit(self.node_id, frame, rate, on_end)

    def _cancel_timer(self):
        if self._timer is not None:
            self._timer.cancel()
            self._timer = None

    # ------------------------------------------------------------------
    # reception
    # ------------------------------------------------------------------

    def on_frame(self, frame, rate, start):
        if self.cw_policy == "mild" and frame.adv_cw > 0 \
                and frame.src != self.node_id:
            self.cats[0].cw = fairness.share_cw_on_hear(self.cats[0].cw,
                                                        frame.adv_cw)
        if self.pcf is not None:
            self.pcf.on_frame(frame)

        kind = frame.kind
        if kind == RTS:
            if frame.dst == self.node_id:
                self._maybe_cts(frame)
            else:
                self._overhear_rts(frame)
        elif kind == CTS:
            if frame.dst == self.node_id and self.phase == AWAIT_CTS:
                self._on_cts(frame)
            elif frame.dst == self.node_id and self.phase == DCFP_WAIT_CTS:
                self._dcfp_send_reverse(frame)
            else:
                self._overhear_cts(frame)
        elif kind in (DATA, DATA_CF_ACK):
            if frame.dst == self.node_id:
                self._on_data(frame)
            else:
                self._overhear(frame)
        elif kind == ACK:
            if frame.dst == self.node_id and self.phase == AWAIT_ACK:
                self._on_ack(frame)
            elif frame.dst == self.node_id and self.phase == ICA_WINDOW:
                self._ica_on_ack()
            else:
                self._overhear(frame)
        elif kind == BEACON:
            self.set_nav(self.sim.now + frame.duration, frame.xid)
        elif kind == CF_POLL:
            if frame.dst == self.node_id:
                self._on_poll(frame)
        elif kind == CF_END:
            self._nav_reset()

    def _nav_reset(self):
        self.nav_until = self.sim.now
        self.nav_xid = -1
        if self._nav_event is not None:
            self._nav_event.cancel()
            self._nav_event = None
        if self._virtually_idle():
            self._on_idle_edge()

    def _overhear(self, frame):
        if frame.duration > 0 or frame.xid == self.nav_xid:
            self.set_nav(self.sim.now + frame.duration, frame.xid,
                         replace=(frame.rsh == 1 or frame.xid == self.nav_xid))

    def _overhear_cts(self, frame):
        if self.ica_enabled and self.ica.xid == frame.xid and \
                self._ica_timer is not None:
            self._ica_timer.cancel()
            self._ica_timer = None
            self.ica.clear()
        # Estimation snooping: a CTS not involving us reveals a data exchange.
        if self.cw_policy == "est" and frame.src != self.node_id:
            p = self.params
            data_air = frame.duration - 2 * p.sifs_us - ACK_AIR
            rate_est = frame.selected_rate or self.fixed_rate
            bits = max(0, (data_air - 192)) * rate_est
            if bits > 0:
                self.estimate.note_others(self.sim.now, bits)
        self._overhear(frame)

    def _overhear_rts(self, frame):
        if self.ica_enabled and self.phase == IDLE:
            self.ica.rts_sender = frame.src
            self.ica.rts_duration = frame.duration
            self.ica.rts_end = self.sim.now
            self.ica.xid = frame.xid
            self.ica.exposed = False
            if self._ica_timer is not None:
                self._ica_timer.cancel()
            p = self.params
            wait = self.ica_cts_timeout_us
            if wait is None:
                wait = p.sifs_us + CTS_AIR + p.slot_us
            self._ica_timer = self.sim.schedule_in(
                wait, "ica_cts_timeout", self.node_id, self._ica_cts_timeout)
            # Defer like DCF would, but only until the CTS question is
            # settled; the timeout either frees us (exposed) or re-blocks.
            self.set_nav(self.sim.now + wait, frame.xid)
            return
        self._overhear(frame)

    # -- responder side -------------------------------------------------

    def _maybe_cts(self, frame):
        if self.phase != IDLE or self.nav_until > self.sim.now:
            return
        p = self.params
        cts = Frame(CTS, self.node_id, frame.src, payload_bytes=CTS_BYTES,
                    xid=frame.xid)
        if frame.tentative_rate:
            selected = rate_mod.rbar_select_rate(
                self.medium.quality.state(frame.src, self.node_id))
            rsh = 80 if rate_mod.rbar_needs_rsh(frame.tentative_rate,
                                                selected) else 0
            cts.selected_rate = selected
            cts.size = frame.size
            cts.duration = (2 * p.sifs_us + airtime(frame.size, selected)
                            + rsh + ACK_AIR)
        else:
            cts.duration = max(0, frame.duration - p.sifs_us - CTS_AIR)
        self.sim.schedule_in(p.sifs_us, "send_cts", self.node_id,
                             lambda: self._respond(cts))
        # Stay quiet while the exchange we just enabled runs.
        self.set_nav(self.sim.now + p.sifs_us + CTS_AIR + cts.duration,
                     frame.xid, replace=True)

    def _respond(self, frame):
        self._transmit(frame, 1)

    def _on_data(self, frame):
        p = self.params
        delivered = self._reassemble(frame)
        if frame.kind == DATA_CF_ACK:
            return  # contention-free response; the poll loop carries on
        ack = Frame(ACK, self.node_id, frame.src, payload_bytes=ACK_BYTES,
                    xid=frame.xid)
        ack.duration = max(0, frame.duration - p.sifs_us - ACK_AIR)
        if self.phase == DCFP_WAIT_REV and frame.src == self._quiet_peer:
            self.phase = IDLE
            self._cancel_timer()
            self._quiet_peer = None
        elif (self.dcfplus and ack.duration == 0 and frame.standalone == 0
                and frame.more_fragments == 0 and frame.fragment_number == 0
                and self.phase == IDLE):
            rev = self._dcfp_reverse_packet(frame.src)
            if rev is not None:
                ack.duration = ext.dcfplus_ack_duration(rev.remaining,
                                                        self.fixed_rate,
                                                        p.sifs_us)
                self._dcfp_packet = rev
                self.phase = DCFP_WAIT_CTS
                self._quiet_peer = frame.src

        def send_ack():
            self._transmit(ack, 1, self._after_own_ack(ack))

        self.sim.schedule_in(p.sifs_us, "send_ack", self.node_id, send_ack)
        if ack.duration > 0 and self.phase != DCFP_WAIT_CTS:
            # More fragments follow; keep quiet for the rest of the burst.
            self.set_nav(self.sim.now + p.sifs_us + ACK_AIR + ack.duration,
                         frame.xid, replace=True)
        del delivered

    def _after_own_ack(self, ack):
        def cb():
            if self.phase == DCFP_WAIT_CTS:
                p = self.params
                self._timer = self.sim.schedule_in(
                    p.sifs_us + CTS_AIR + p.slot_us, "dcfp_cts_timeout",
                    self.node_id, self._dcfp_abort)
        return cb

    def _reassemble(self, frame):
        key = (frame.src, frame.packet_id)
        ent = self._rx.setdefault(key, {"ranges": set(), "total": frame.size,
                                        "done": False})
        ent["ranges"].add((frame.frag_offset, frame.payload_bytes))
        covered = _coverage(ent["ranges"])
        if not ent["done"] and covered >= ent["total"]:
            ent["done"] = True
            if self.recorder is not None:
                self.recorder.on_delivered(frame.flow_id, frame.packet_id,
                                           ent["total"] * 8)
            self.sim.trace(self.node_id, "deliver",
                           "flow=%d pkt=%d" % (frame.flow_id, frame.packet_id))
            return True
        return False

    # -- DCF+ ------------------------------------------------------------

    def _dcfp_reverse_packet(self, peer):
        for cat in self.cats:
            for pkt in cat.queue:
                if pkt.dst == peer and pkt.remaining == pkt.size \
                        and pkt.size <= self.params.frag_threshold:
                    return pkt
        return None

    def _dcfp_grant(self, ack):
        """We sent DATA, the ACK asks for a reverse slot: answer with CTS."""
        p = self.params
        self.phase = DCFP_WAIT_REV
        self._quiet_peer = ack.src
        cts = Frame(CTS, self.node_id, ack.src, payload_bytes=CTS_BYTES,
                    duration=max(0, ack.duration - p.sifs_us - CTS_AIR),
                    xid=ack.xid)

        def after_cts():
            rev_air = max(0, ack.duration - 3 * p.sifs_us - CTS_AIR - ACK_AIR)
            self._timer = self.sim.schedule_in(
                p.sifs_us + rev_air + p.slot_us, "dcfp_rev_timeout",
                self.node_id, self._dcfp_abort)

        self.sim.schedule_in(p.sifs_us, "send_cts", self.node_id,
                             lambda: self._transmit(cts, 1, after_cts))
        self._chain = None
        self._cur_cat = None

    def _dcfp_send_reverse(self, cts):
        """Our piggyback request was granted; ship the reverse packet."""
        self._cancel_timer()
        p = self.params
        pkt = self._dcfp_packet
        frame = Frame(DATA, self.node_id, pkt.dst,
                      duration=p.sifs_us + ACK_AIR, payload_bytes=pkt.size,
                      packet_id=pkt.pid, flow_id=pkt.flow_id, xid=cts.xid,
                      size=pkt.size)
        frame.frag_offset = 0
        frame.standalone = 1

        def send():
            self._transmit(frame, self.fixed_rate, self._dcfp_after_rev)

        self.sim.schedule_in(p.sifs_us, "send_data", self.node_id, send)

    def _dcfp_after_rev(self):
        p = self.params
        self._timer = self.sim.schedule_in(
            p.sifs_us + ACK_AIR + p.slot_us, "dcfp_ack_timeout",
            self.node_id, self._dcfp_abort)
        self.phase = AWAIT_ACK
        # Reuse the normal ACK path: fabricate a one-element chain.
        pkt = self._dcfp_packet
        for cat in self.cats:
            if pkt in cat.queue:
                self._cur_cat = cat
                break
        self._chain = [_ChainElem(pkt, pkt.size, 0, 0, standalone=1)]
        self._chain_idx = 0

    def _dcfp_abort(self):
        self._timer = None
        self.phase = IDLE
        self._quiet_peer = None
        self._dcfp_packet = None
        self._chain = None
        self._cur_cat = None
        if self._virtually_idle():
            self._on_idle_edge()

    # -- ICA -------------------------------------------------------------

    def _ica_cts_timeout(self):
        self._ica_timer = None
        p = self.params
        st = self.ica
        st.exposed = True
        st.window_end = ext.ica_primary_data_end(st.rts_end, st.rts_duration,
                                                 p.sifs_us)
        reservation_end = st.rts_end + st.rts_duration
        cat = self.cats[0]
        if self.phase != IDLE or not cat.queue:
            self._ica_fallback(reservation_end)
            return
        if self.sense_count > 0 or self.self_tx:
            # Something (likely the CTS) is still in the air; not exposed.
            self._ica_fallback(reservation_end)
            return
        head = cat.queue[0]
        start, sizes = ext.ica_plan_parallel(self.sim.now, st.window_end,
                                             head.remaining,
                                             p.frag_threshold,
                                             self.fixed_rate, p.sifs_us)
        if not sizes:
            self._ica_fallback(reservation_end)
            return
        self.sim.trace(self.node_id, "ica_exposed",
                       "window_end=%d frags=%d" % (st.window_end, len(sizes)))
        self.phase = ICA_WINDOW
        self._ica_sizes = sizes
        self._ica_packet = head
        self._ica_reservation_end = reservation_end
        for c in self.cats:
            if c.timer is not None:
                c.timer.cancel()
                c.timer = None
        self.sim.schedule(max(start, self.sim.now), "ica_start", self.node_id,
                          self._ica_send_frag)

    def _ica_fallback(self, reservation_end):
        self.ica.clear()
        self.set_nav(reservation_end)

    def _ica_send_frag(self):
        if self.phase != ICA_WINDOW:
            return
        p = self.params
        pkt = self._ica_packet
        size = min(self._ica_sizes[0], pkt.remaining)
        mf = 1 if pkt.remaining > size else 0
        frame = Frame(DATA, self.node_id, pkt.dst,
                      duration=p.sifs_us + ACK_AIR, payload_bytes=size,
                      more_fragments=mf, fragment_number=pkt.next_frag,
                      packet_id=pkt.pid, flow_id=pkt.flow_id,
                      xid=self._new_xid(), size=pkt.size)
        frame.frag_offset = pkt.offset
        frame.standalone = 0
        self._ica_cur_size = size

        def after():
            self._timer = self.sim.schedule_in(
                p.sifs_us + ACK_AIR + p.slot_us, "ica_ack_timeout",
                self.node_id, self._ica_abort)

        self._transmit(frame, self.fixed_rate, after)

    def _ica_on_ack(self):
        self._cancel_timer()
        pkt = self._ica_packet
        pkt.remaining -= self._ica_cur_size
        pkt.next_frag += 1
        self._ica_sizes.pop(0)
        cat = self.cats[0]
        if pkt.remaining == 0:
            self._complete_packet(cat, pkt)
        if pkt.remaining > 0 and self._ica_sizes:
            self.sim.schedule_in(self.params.sifs_us, "ica_next", self.node_id,
                                 self._ica_send_frag)
            return
        self._ica_close()

    def _ica_abort(self):
        self._timer = None
        self.sim.trace(self.node_id, "ica_abort", "")
        self._ica_close()

    def _ica_close(self):
        end = self._ica_reservation_end
        self.phase = IDLE
        self._ica_sizes = None
        self.ica.clear()
        self.cats[0].ready_time = self.sim.now
        self.set_nav(end)
        if self._virtually_idle():
            self._on_idle_edge()

    # -- PCF responder ---------------------------------------------------

    def _on_poll(self, frame):
        p = self.params
        cat = self.cats[0]
        if cat.queue:
            pkt = cat.queue[0]
            resp = Frame(DATA_CF_ACK, self.node_id, pkt.dst,
                         payload_bytes=pkt.remaining, packet_id=pkt.pid,
                         flow_id=pkt.flow_id, size=pkt.size)
            resp.frag_offset = pkt.offset
            resp.standalone = 1

            def done():
                pkt.remaining = 0
                self._complete_packet(cat, pkt)

            self.sim.schedule_in(
                p.sifs_us, "send_cf_data", self.node_id,
                lambda: self._transmit(resp, self.fixed_rate, done))
        else:
            resp = Frame(CF_ACK, self.node_id, frame.src,
                         payload_bytes=ACK_BYTES)
            self.sim.schedule_in(p.sifs_us, "send_cf_ack", self.node_id,
                                 lambda: self._transmit(resp, 1))

    # ------------------------------------------------------------------
    # traffic entry
    # ------------------------------------------------------------------

    def enqueue(self, pkt, category=0):
        cat = self.cats[category]
        was_empty = not cat.queue
        cat.queue.append(pkt)
        if was_empty:
            cat.ready_time = self.sim.now
        self._arm(cat)

    def queued_packets(self):
        return sum(len(c.queue) for c in self.cats)


def _coverage(ranges):
    """Total bytes covered by possibly-overlapping (offset, length) ranges."""
    total = 0
    end = -1
    for off, length in sorted(ranges):
        stop = off + length
        if off > end:
            total += length
            end = stop
        elif stop > end:
            total += stop - end
            end = stop
    return total
