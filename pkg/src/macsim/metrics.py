"""Metric collection and CSV emission.

A Recorder rides along during a run: packet generation, delivery (deduped by
packet id, so retransmitted duplicates count once), drops, and the delivery
timeline feeding the windowed fairness series.  finalize() folds in the
medium's collision statistics and freezes everything into a Metrics value.
"""

import math
from dataclasses import dataclass, field

from .fairness import fairness_index


@dataclass
class FlowMetrics:
    generated_bits: int = 0
    generated_packets: int = 0
    delivered_bits: int = 0
    delivered_packets: int = 0
    drops: int = 0
    mean_delay_us: float = 0.0
    p95_delay_us: float = 0.0


@dataclass
class Metrics:
    duration_us: int = 0
    flows: dict = field(default_factory=dict)  # flow id -> FlowMetrics
    collision_events: int = 0
    total_transmissions: int = 0
    collision_fraction: float = 0.0
    ack_collisions: int = 0
    fairness_series: list = field(default_factory=list)  # (window idx, value)

    @property
    def aggregate_delivered_bits(self):
        return sum(f.delivered_bits for f in self.flows.values())

    @property
    def aggregate_throughput_bps(self):
        if self.duration_us == 0:
            return 0.0
        return self.aggregate_delivered_bits * 1e6 / self.duration_us

    def throughput_bps(self, fid):
        if self.duration_us == 0:
            return 0.0
        return self.flows[fid].delivered_bits * 1e6 / self.duration_us

    @property
    def fairness_mean(self):
        if not self.fairness_series:
            return 0.0
        return sum(v for _, v in self.fairness_series) / len(self.fairness_series)


class Recorder:
    """Run-time event sink wired into every MacNode."""

    def __init__(self, sim, flow_ids, shares=None, window_us=100_000):
        self.sim = sim
        self.flow_ids = list(flow_ids)
        self.shares = dict(shares) if shares else {f: 1.0 for f in flow_ids}
        self.window_us = window_us
        self.generated = {f: [0, 0] for f in flow_ids}  # fid -> [bits, packets]
        self.delays = {f: [] for f in flow_ids}
        self.drops = {f: 0 for f in flow_ids}
        self.delivered_bits = {f: 0 for f in flow_ids}
        self.deliveries = []  # (time_us, fid, bits)
        self._delivered_pids = set()
        self._pending = {}  # pid -> (fid, created_us, bits)
        self.refill = {}  # fid -> callback, set by the traffic source

    # -- hooks called from the MACs and traffic sources ---------------------

    def on_generated(self, pkt):
        self.generated[pkt.flow_id][0] += pkt.size * 8
        self.generated[pkt.flow_id][1] += 1
        self._pending[pkt.pid] = (pkt.flow_id, pkt.created, pkt.size * 8)

    def on_delivered(self, fid, pid, bits):
        if pid in self._delivered_pids:
            return
        self._delivered_pids.add(pid)
        self.delivered_bits[fid] += bits
        self.deliveries.append((self.sim.now, fid, bits))
        ent = self._pending.pop(pid, None)
        if ent is not None:
            self.delays[fid].append(self.sim.now - ent[1])

    def on_drop(self, pkt):
        if pkt.pid in self._delivered_pids:
            return  # the data made it; only the final ACK was lost
        self._pending.pop(pkt.pid, None)
        self.drops[pkt.flow_id] += 1

    def on_sender_done(self, pkt):
        cb = self.refill.get(pkt.flow_id)
        if cb is not None:
            cb()

    # -- finalization -------------------------------------------------------

    def finalize(self, duration_us, medium_stats):
        m = Metrics(duration_us=duration_us)
        for fid in self.flow_ids:
            fm = FlowMetrics(
                generated_bits=self.generated[fid][0],
                generated_packets=self.generated[fid][1],
                delivered_bits=self.delivered_bits[fid],
                delivered_packets=len(self.delays[fid]),
                drops=self.drops[fid])
            delays = self.delays[fid]
            if delays:
                fm.mean_delay_us = sum(delays) / len(delays)
                fm.p95_delay_us = float(
                    sorted(delays)[max(0, math.ceil(0.95 * len(delays)) - 1)])
            m.flows[fid] = fm
        m.collision_events = medium_stats.collision_events
        m.total_transmissions = medium_stats.total_transmissions
        m.collision_fraction = medium_stats.collision_fraction
        m.ack_collisions = medium_stats.ack_collisions
        m.fairness_series = self._fairness_series(duration_us)
        return m

    def _fairness_series(self, duration_us):
        """Per-window worst-pair fairness over flows with positive shares.

        Windows where nothing was delivered are skipped; a window where one
        flow starved yields 0, which is the honest short-term reading.
        """
        if len(self.flow_ids) < 2:
            return []
        series = []
        nwin = duration_us // self.window_us
        buckets = {k: {f: 0 for f in self.flow_ids} for k in range(nwin)}
        for t, fid, bits in self.deliveries:
            k = min(t // self.window_us, nwin - 1) if nwin else 0
            if nwin:
                buckets[k][fid] += bits
        shares = [self.shares[f] for f in self.flow_ids]
        for k in range(nwin):
            w = [buckets[k][f] for f in self.flow_ids]
            if all(v == 0 for v in w):
                continue
            series.append((k, fairness_index(shares, w)))
        return series


# -- CSV --------------------------------------------------------------------

CSV_HEADER = ("variant,flow,generated_bits,delivered_bits,throughput_bps,"
              "mean_delay_us,p95_delay_us,drops,collision_events,"
              "total_transmissions,collision_fraction,fairness_mean")


def format_csv(table):
    """CSV text for {variant name: Metrics}: per-flow rows then a summary row."""
    lines = [CSV_HEADER]
    for variant in table:
        m = table[variant]
        for fid in sorted(m.flows):
            fm = m.flows[fid]
            lines.append(
                "%s,%d,%d,%d,%.3f,%.3f,%.3f,%d,,,," % (
                    variant, fid, fm.generated_bits, fm.delivered_bits,
                    m.throughput_bps(fid), fm.mean_delay_us, fm.p95_delay_us,
                    fm.drops))
        lines.append(
            "%s,all,%d,%d,%.3f,,,%d,%d,%d,%.6f,%.6f" % (
                variant,
                sum(f.generated_bits for f in m.flows.values()),
                m.aggregate_delivered_bits, m.aggregate_throughput_bps,
                sum(f.drops for f in m.flows.values()),
                m.collision_events, m.total_transmissions,
                m.collision_fraction, m.fairness_mean))
    return "\n".join(lines) + "\n"


def write_csv(table, path):
    with open(path, "w") as fh:
        fh.write(format_csv(table))
