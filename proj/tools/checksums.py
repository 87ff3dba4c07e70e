#!/usr/bin/env python3
"""Regenerate fixtures/CHECKSUMS (64-bit FNV-1a)."""
import os
import sys

d = sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "fixtures")


def fnv1a(b):
    h = 0xCBF29CE484222325
    for c in b:
        h ^= c
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


with open(os.path.join(d, "CHECKSUMS"), "w") as out:
    for n in sorted(os.listdir(d)):
        if n != "CHECKSUMS" and n.endswith(".csv"):
            with open(os.path.join(d, n), "rb") as f:
                out.write("%016x  %s\n" % (fnv1a(f.read()), n))
