#!/usr/bin/env python3
"""Derive the stage costs in crates/core/data/d9300.cal from the published
end-to-end timings on a Dimensity 9300 phone and print the residuals.

Targets (2:4 image = 9 patches, 2048 input tokens, 2048 KV):
  * encode, batch 4, pipelined:  1.9 s ViT + 0.16 s exposed Conv2D = 2.06 s,
    with 200 ms of Conv2D hidden under the NPU
  * batch sweep {1, 2, 4, 6}: fastest at 4
  * prefill at 128-token chunks: 2.7 s; chunk sweep {32, 128, 512, 2048}:
    fastest at 128
  * decode: 24.4 token/s
  * model load: 0.47 s

Fit:
  Conv2D is linear in group size. The exposed first group (4 patches) costs
  160 ms and the two hidden groups (4 + 1 patches) cost 200 ms, so 40 ms per
  patch.
  ViT groups 4 + 4 + 1 must sum to 1900 ms. Per-patch ViT cost is chosen to
  fall until 4 patches and rise after, giving 300/250/216.7/200/220/240 ms.
  Prefill chunk cost F + p*c + q*c^2 has total N*F/c + N*p + N*q*c for
  chunks that divide N, minimised at c = sqrt(F/q). With F = 32, q = 0.002
  the optimum is c = 126.5, nearest candidate 128; p absorbs the remainder.
  Decode is the reciprocal of the throughput.
"""

import math

N_PATCHES = 9
TOKENS = 2048

conv = {b: 40.0 * b for b in range(1, 9)}
vit = {1: 300.0, 2: 500.0, 3: 650.0, 4: 800.0, 5: 1100.0, 6: 1440.0, 7: 1820.0, 8: 2240.0}
F, P, Q = 32.0, 0.8125, 0.002
DECODE = 40.98
LOAD = 470.0


def groups(n, b):
    out = []
    while n > 0:
        out.append(min(n, b))
        n -= out[-1]
    return out


def encode(n, b):
    cpu = npu = 0.0
    hidden = 0.0
    npu_iv = []
    cpu_iv = []
    for g in groups(n, b):
        cs, ce = cpu, cpu + conv[g]
        vs = max(ce, npu)
        ve = vs + vit[g]
        cpu_iv.append((cs, ce))
        npu_iv.append((vs, ve))
        cpu, npu = ce, ve
    for cs, ce in cpu_iv:
        for vs, ve in npu_iv:
            hidden += max(0.0, min(ce, ve) - max(cs, vs))
    return npu, hidden


def prefill(n, c):
    t = 0.0
    done = 0
    while done < n:
        l = min(c, n - done)
        t += F + P * l + Q * l * l
        done += l
    return t


def rel(got, want):
    return (got - want) / want


if __name__ == "__main__":
    mk, hid = encode(N_PATCHES, 4)
    print(f"encode b=4: {mk:.1f} ms (target 2060, residual {rel(mk, 2060):+.4%}), hidden {hid:.1f} ms (target >= 200)")
    for b in (1, 2, 4, 6):
        print(f"  sweep b={b}: {encode(N_PATCHES, b)[0]:.1f} ms")
    pf = prefill(TOKENS, 128)
    print(f"prefill t128: {pf:.1f} ms (target 2700, residual {rel(pf, 2700):+.4%})")
    for c in (32, 128, 512, 2048):
        print(f"  sweep c={c}: {prefill(TOKENS, c):.1f} ms")
    print(f"unconstrained optimum chunk: {math.sqrt(F / Q):.1f}")
    tp = 1000.0 / DECODE
    print(f"decode: {tp:.3f} token/s (target 24.4, residual {rel(tp, 24.4):+.4%})")
    print(f"image span: {LOAD + mk:.1f} ms (target 2530)")
