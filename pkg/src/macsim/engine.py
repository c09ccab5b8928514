"""Discrete-event engine: monotone clock, cancellable timers, per-node PRNG streams.

Time is kept in integer microseconds throughout the simulator.  Events with
equal timestamps dispatch in insertion order (a sequence counter breaks heap
ties), so a run is fully determined by the scenario and the seed.
"""

import heapq

MASK64 = (1 << 64) - 1


class SchedulingError(Exception):
    """Raised when an event is scheduled before the current clock."""


class Event:
    """A scheduled occurrence.  Keep the handle to cancel it."""

    __slots__ = ("time", "seq", "kind", "target", "fn", "cancelled")

    def __init__(self, time, seq, kind, target, fn):
        self.time = time
        self.seq = seq
        self.kind = kind
        self.target = target  # node id, or "-" for the medium/engine
        self.fn = fn
        self.cancelled = False

    def cancel(self):
        self.cancelled = True

    def __lt__(self, other):
        return (self.time, self.seq) < (other.time, other.seq)


class Simulator:
    """Single-threaded event loop owning the clock, queue and trace."""

    def __init__(self):
        self.now = 0  # [us]
        self._queue = []
        self._seq = 0
        self.dispatched = 0
        self.trace_lines = None  # list of "time\tnode\tkind\tdetail" when tracing

    def enable_trace(self):
        self.trace_lines = []

    def trace(self, node, kind, detail=""):
        if self.trace_lines is not None:
            self.trace_lines.append("%d\t%s\t%s\t%s" % (self.now, node, kind, detail))

    def schedule(self, time, kind, target, fn):
        """Enqueue `fn` to run at `time`.  Returns a cancellable Event handle."""
        if time < self.now:
            raise SchedulingError(
                "schedule at t=%d before clock t=%d (%s)" % (time, self.now, kind)
            )
        ev = Event(time, self._seq, kind, target, fn)
        self._seq += 1
        heapq.heappush(self._queue, ev)
        return ev

    def schedule_in(self, delay, kind, target, fn):
        return self.schedule(self.now + delay, kind, target, fn)

    def run_until(self, t_end):
        """Dispatch every event with time <= t_end; leave the clock at t_end."""
        if t_end < self.now:
            raise SchedulingError("run_until(%d) before clock t=%d" % (t_end, self.now))
        count = 0
        q = self._queue
        while q and q[0].time <= t_end:
            ev = heapq.heappop(q)
            if ev.cancelled:
                continue
            self.now = ev.time
            self.trace(ev.target, ev.kind)
            ev.fn()
            self.dispatched += 1
            count += 1
        self.now = t_end
        return count


def _splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return x, z ^ (z >> 31)


class RandomStream:
    """splitmix64 stream; (seed, node_id) fixes the draw sequence on any platform.

    The substream state is seeded by one splitmix64 step over
    seed XOR (node_id * 0x9E3779B97F4A7C15), so per-node streams are
    independent of each other and of draw order elsewhere.
    """

    __slots__ = ("_state",)

    def __init__(self, seed, node_id=0):
        mix = (seed ^ ((node_id * 0x9E3779B97F4A7C15) & MASK64)) & MASK64
        _, self._state = _splitmix64(mix)

    def next_u64(self):
        self._state, out = _splitmix64(self._state)
        return out

    def uniform_int(self, lo, hi):
        """Integer in [lo, hi], via 64-bit modulo (documented, portable)."""
        if lo > hi:
            raise ValueError("uniform_int: lo %d > hi %d" % (lo, hi))
        span = hi - lo + 1
        return lo + self.next_u64() % span

    def uniform(self):
        """Float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def bernoulli(self, p):
        return self.uniform() < p
