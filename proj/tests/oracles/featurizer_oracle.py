# Copyright (c) 2026, The driftguard authors
# SPDX-License-Identifier: Apache-2.0
"""Independent reference for the hashing featurizer.

Prints the sparse vectors for a fixed probe pair (and its swap) so the C++
suite can freeze them as golden values. Run: python3 featurizer_oracle.py
"""
import math

M = (1 << 64) - 1


def mix(x):
    x = (x + 0x9E3779B97F4A7C15) & M
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & M
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & M
    return x ^ (x >> 31)


def fnv1a(data: bytes):
    h = 0xCBF29CE484222325
    for b in data:
        h = ((h ^ b) * 0x100000001B3) & M
    return h


def featurize(a, b=None, dim=4096, orders=(1, 2), salt_a=0x61, salt_b=0x62, seed=0x5EED):
    acc = {}

    def add(text, salt):
        toks = text.lower().split()
        key = mix(seed ^ mix(salt))
        for n in orders:
            for s in range(len(toks) - n + 1):
                h = mix(fnv1a(" ".join(toks[s:s + n]).encode()) ^ key)
                idx = h & (dim - 1)
                acc[idx] = acc.get(idx, 0.0) + (-1.0 if h >> 63 else 1.0)

    add(a, salt_a)
    if b is not None:
        add(b, salt_b)
    acc = {k: v for k, v in acc.items() if v != 0.0}
    norm = math.sqrt(sum(v * v for v in acc.values()))
    return sorted((k, v / norm) for k, v in acc.items())


if __name__ == "__main__":
    probe_a, probe_b = "The cat sat", "a dog ran home"
    for label, (x, y) in (("ab", (probe_a, probe_b)), ("ba", (probe_b, probe_a))):
        print(label, [(k, repr(v)) for k, v in featurize(x, y)])
