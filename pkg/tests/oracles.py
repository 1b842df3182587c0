"""Independent reference implementations the tests check production code against.

Everything here is deliberately brute-force and self-contained: path
enumeration instead of Dijkstra, full allocation enumeration instead of
branch and bound, direct set unions instead of interval scoring. Keep these
free of calls into the production modules they are used to verify.
"""

import itertools
import math


def all_simple_paths(adjacency, origin, dest):
    """Yield (node_list, distance) for every simple path via DFS.

    `adjacency` maps node -> list of (neighbor, length).
    """
    stack = [(origin, [origin], 0.0)]
    while stack:
        node, path, dist = stack.pop()
        if node == dest:
            yield path, dist
            continue
        for neighbor, length in adjacency[node]:
            if neighbor not in path:
                stack.append((neighbor, path + [neighbor], dist + length))


def brute_shortest_distance(adjacency, origin, dest):
    """Minimum simple-path distance, or None when unreachable."""
    if origin == dest:
        return 0.0
    best = None
    for _path, dist in all_simple_paths(adjacency, origin, dest):
        if best is None or dist < best:
            best = dist
    return best


def adjacency_with_lengths(net):
    """Plain adjacency map (node -> [(neighbor, length)]) from a network."""
    return {
        node: [(v, float(net.seg_length_m[seg])) for v, seg in net.adjacency[node]]
        for node in range(net.num_nodes)
    }


def enumerate_sensor_vectors(caps, budget):
    """Every integer vector with 0 <= n_s <= caps[s] and sum <= budget."""
    ranges = [range(c + 1) for c in caps]
    for vec in itertools.product(*ranges):
        if sum(vec) <= budget:
            yield vec


def allocation_objective(p_dense, lengths, K, n, eps=1e-9):
    """Length of segments whose expected coverage reaches K under vector n."""
    num_segments = len(lengths)
    total = 0.0
    for e in range(num_segments):
        coverage = sum(p_dense[s][e] * n[s] for s in range(len(n)))
        if coverage >= K - eps:
            total += lengths[e]
    return total


def best_allocation_objective(p_dense, lengths, caps, budget, K, eps=1e-9):
    """Exhaustive maximum of the coverage objective."""
    best = 0.0
    for vec in enumerate_sensor_vectors(caps, budget):
        obj = allocation_objective(p_dense, lengths, K, vec, eps)
        if obj > best:
            best = obj
    return best


def touched_length_fraction_pct(log, lengths, t0, t_end):
    """Share of total length on segments any trip enters within the horizon.

    Recomputes segment entry minutes from first principles (cumulative
    distance at constant speed, floored to the minute).
    """
    covered = set()
    for trip in log.trips:
        cum = 0.0
        for seg, seg_len in zip(trip.path.segments, trip.path.seg_lengths_m):
            enter = trip.start_min + math.floor(cum / log.speed_m_per_min)
            if t0 <= enter <= t_end:
                covered.add(seg)
            cum += seg_len
    total = float(sum(lengths))
    return 100.0 * sum(float(lengths[seg]) for seg in covered) / total


def rank_correlation(xs, ys):
    """Spearman rho computed from scratch (average ranks for ties)."""

    def ranks(values):
        order = sorted(range(len(values)), key=lambda i: values[i])
        out = [0.0] * len(values)
        i = 0
        while i < len(order):
            j = i
            while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
                j += 1
            avg = (i + j) / 2.0 + 1.0
            for k in range(i, j + 1):
                out[order[k]] = avg
            i = j + 1
        return out

    rx, ry = ranks(list(xs)), ranks(list(ys))
    n = len(rx)
    mx, my = sum(rx) / n, sum(ry) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    vx = math.sqrt(sum((a - mx) ** 2 for a in rx))
    vy = math.sqrt(sum((b - my) ** 2 for b in ry))
    return cov / (vx * vy)
