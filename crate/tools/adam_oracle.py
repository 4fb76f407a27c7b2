#!/usr/bin/env python3
"""Scripted Adam recurrence, printed as the reference trace used by the
optimizer tests: `adam_oracle.py W0 G STEPS`."""
import math
import sys


def trace(w, g, steps, lr=2e-4, b1=0.9, b2=0.999, eps=1e-8):
    m = v = 0.0
    out = []
    for t in range(1, steps + 1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        w -= lr * m_hat / (math.sqrt(v_hat) + eps)
        out.append(w)
    return out


if __name__ == "__main__":
    w0, g, steps = float(sys.argv[1]), float(sys.argv[2]), int(sys.argv[3])
    for w in trace(w0, g, steps):
        print(repr(w))
