#!/usr/bin/env python3
"""Write crates/core/data/synthetic_10k.manifest: 10,000 image sizes drawn
from a fixed-seed mixture (log-uniform sides, common photo/screen aspects,
thin strips) plus a handful of text-only records."""

import math
import random
import sys

SEED = 20241115
COUNT = 10_000
TEXT_ONLY = 40
ASPECTS = [(1, 1), (4, 3), (3, 4), (16, 9), (9, 16), (3, 2), (2, 3), (9, 19.5), (19.5, 9)]


def sample(rng):
    kind = rng.random()
    if kind < 0.45:
        w = int(math.exp(rng.uniform(math.log(32), math.log(4096))))
        h = int(math.exp(rng.uniform(math.log(32), math.log(4096))))
    elif kind < 0.9:
        a, b = rng.choice(ASPECTS)
        long_side = int(math.exp(rng.uniform(math.log(200), math.log(4096))))
        if a >= b:
            w, h = long_side, max(1, round(long_side * b / a))
        else:
            w, h = max(1, round(long_side * a / b)), long_side
    else:
        w = rng.randint(200, 2000)
        h = rng.randint(20, 160)
        if rng.random() < 0.5:
            w, h = h, w
    return max(1, w), max(1, h)


def main(path):
    rng = random.Random(SEED)
    lines = ["id,width,height", f"# synthetic sizes, seed {SEED}"]
    text_slots = set(rng.sample(range(COUNT + TEXT_ONLY), TEXT_ONLY))
    img = 0
    for i in range(COUNT + TEXT_ONLY):
        if i in text_slots:
            lines.append(f"text{i:05d}")
        else:
            w, h = sample(rng)
            lines.append(f"img{img:05d},{w},{h}")
            img += 1
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/core/data/synthetic_10k.manifest")
