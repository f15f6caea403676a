"""Directed-graph helpers for dependency ordering."""

from __future__ import annotations

from collections import defaultdict
from typing import Hashable, Iterable

_WHITE, _GRAY, _BLACK = 0, 1, 2


def find_cycle(nodes: Iterable[Hashable], edges: Iterable[tuple[Hashable, Hashable]]) -> list | None:
    """Return one cycle as ``[n0, n1, ..., n0]``, or None if the graph is acyclic.

    Self-loops count as cycles. Iterative DFS, so deep chains do not hit the
    recursion limit. Nodes are visited in the given order, which makes the
    reported cycle deterministic.
    """
    adj: dict = defaultdict(list)
    order = list(dict.fromkeys(nodes))
    for src, dst in edges:
        adj[src].append(dst)
        for n in (src, dst):
            if n not in adj:
                adj[n] = []
    for n in list(adj):
        if n not in order:
            order.append(n)

    color = {n: _WHITE for n in order}
    parent: dict = {}
    for root in order:
        if color[root] != _WHITE:
            continue
        color[root] = _GRAY
        stack = [(root, iter(adj[root]))]
        while stack:
            node, children = stack[-1]
            for child in children:
                if color[child] == _WHITE:
                    color[child] = _GRAY
                    parent[child] = node
                    stack.append((child, iter(adj[child])))
                    break
                if color[child] == _GRAY:
                    cycle = [child]
                    cur = node
                    while cur != child:
                        cycle.append(cur)
                        cur = parent[cur]
                    cycle.append(child)
                    cycle.reverse()
                    return cycle
            else:
                color[node] = _BLACK
                stack.pop()
    return None


def topological_order(nodes: Iterable[Hashable], edges: Iterable[tuple[Hashable, Hashable]]) -> list:
    """Kahn ordering where every edge ``(a, b)`` places ``b`` before ``a``.

    Edges read as "a depends on b". Ties are broken by sorted node order.
    Raises ValueError on a cycle.
    """
    nodes = sorted(set(nodes))
    deps: dict = {n: set() for n in nodes}
    users: dict = defaultdict(set)
    for a, b in edges:
        deps.setdefault(a, set()).add(b)
        deps.setdefault(b, set())
        users[b].add(a)
    ready = sorted(n for n, d in deps.items() if not d)
    out = []
    while ready:
        n = ready.pop(0)
        out.append(n)
        for user in sorted(users[n]):
            deps[user].discard(n)
            if not deps[user]:
                ready.append(user)
        ready.sort()
    if len(out) != len(deps):
        raise ValueError("graph has a cycle")
    return out
