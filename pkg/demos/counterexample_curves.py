"""Divergent and bounded curves from the three counter-example families.

Writes one CSV per example into demos/out/ and prints the last few points.
"""
from pathlib import Path

from dyadic_weights.gallery import example_separated_vs_conjoined, example_strong_failure, example_weak_failure

out = Path(__file__).with_name("out")
out.mkdir(exist_ok=True)
Ts = [2.0 ** j for j in range(4, 31, 2)]

examples = [
    example_strong_failure(2.0, 5.0, 0.25, Ts=Ts, realize=False),
    example_weak_failure(4.0, 4.0, 0.5, Ts=Ts, realize=False),
    example_separated_vs_conjoined(2.0, 2.0, 0.5, k_max=20),
]
for ex in examples:
    rows = ex.csv_rows()
    path = out / f"{ex.id}.csv"
    path.write_text("parameter,quantity,value\n" + "".join(f"{a!r},{b},{c!r}\n" for a, b, c in rows))
    print(f"{ex.id}: {len(rows)} rows -> {path}")
    for name in sorted(ex.curves):
        tail = ex.curves[name][-3:]
        print("   ", name, ", ".join(f"{v:.4g}" for _, v in tail))
