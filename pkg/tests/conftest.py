"""Shared helpers: scenario text builders used across the test modules."""

from macsim.scenario import parse_scenario


def single_cell(n_senders, packet_bytes, seed, duration_us, variant="dcf",
                mac_lines=(), sim_lines=(), link_lines=(), flow_kind=None):
    """n_senders backlogged senders, nodes 1..n, all transmitting to node 0.

    Every node sits well inside one carrier-sense cell.
    """
    lines = ["[sim]", "seed = %d" % seed, "duration_us = %d" % duration_us]
    lines += list(sim_lines)
    lines += ["[nodes]", "0 = 0 0"]
    for i in range(1, n_senders + 1):
        lines.append("%d = %d 0" % (i, i))
    lines += ["[links]", "hear_range = 50", "base_fer_high = 0"]
    lines += list(link_lines)
    lines += ["[mac]", "variant = %s" % variant]
    lines += list(mac_lines)
    lines += ["[flows]"]
    for i in range(1, n_senders + 1):
        lines.append("%d = %d 0 %s" % (i, i,
                                       flow_kind or "backlogged %d" % packet_bytes))
    return "\n".join(lines) + "\n"


def parse(text):
    return parse_scenario(text)
