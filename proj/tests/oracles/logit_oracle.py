#!/usr/bin/env python3
# Copyright 2026 The gnndcm Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#    http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Reference values for the logit closed forms and hop distances.

Written against the textbook definitions with numpy only, sharing no code
with the library. The printed values are frozen into tests/unit/test_oracles.cpp.
"""

from collections import deque

import numpy as np

UTIL = np.array([0.3, -1.2, 0.8, 0.0, -0.4, 1.1])
EDGES = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 2), (1, 4)]
NESTS = [[0, 2, 5], [1, 3], [4]]
MU = [0.4, 0.7, 0.9]


def adjacency(n, edges):
    adj = [set() for _ in range(n)]
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    return adj


def hops(adj, source):
    dist = [-1] * len(adj)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for w in sorted(adj[u]):
            if dist[w] < 0:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def nested_logit(v, nests, mu):
    p = np.zeros(len(v))
    inclusive = np.array([np.log(np.sum(np.exp(v[n] / m))) for n, m in zip(nests, mu)])
    nest_p = np.exp(np.array(mu) * inclusive)
    nest_p /= nest_p.sum()
    for k, (n, m) in enumerate(zip(nests, mu)):
        within = np.exp(v[n] / m)
        p[n] = nest_p[k] * within / within.sum()
    return p


def spatially_correlated_logit(v, adj, mu):
    # One nest per edge; each alternative splits equally over its edges.
    pairs = sorted({(min(a, b), max(a, b)) for a in range(len(adj)) for b in adj[a]})
    alpha = [1.0 / len(adj[i]) for i in range(len(adj))]
    terms = {}
    for i, j in pairs:
        terms[(i, j)] = ((alpha[i] * np.exp(v[i])) ** (1 / mu), (alpha[j] * np.exp(v[j])) ** (1 / mu))
    denom = sum((a + b) ** mu for a, b in terms.values())
    p = np.zeros(len(v))
    for (i, j), (a, b) in terms.items():
        nest_p = (a + b) ** mu / denom
        p[i] += nest_p * a / (a + b)
        p[j] += nest_p * b / (a + b)
    return p


def main():
    adj = adjacency(len(UTIL), EDGES)
    np.set_printoptions(precision=17)
    print("hops_from_0 =", hops(adj, 0))
    print("hops_from_5 =", hops(adj, 5))
    print("nl =", ", ".join(f"{x:.17g}" for x in nested_logit(UTIL, NESTS, MU)))
    for mu in (0.3, 0.75):
        print(f"scl_mu_{mu} =", ", ".join(f"{x:.17g}" for x in spatially_correlated_logit(UTIL, adj, mu)))


if __name__ == "__main__":
    main()
