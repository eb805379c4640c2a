"""Independent count of the 20-basket fixture.

Writes golden_table.txt (k_collect=3, min_freq=3) in the canonical
table text layout, and golden_report.json for predictions.jsonl.
Run from this directory: python3 make_golden.py
"""
import json
import math
from collections import Counter, defaultdict

K_COLLECT, MIN_FREQ = 3, 3

concepts = [l.strip() for l in open("concepts.txt") if l.strip() and not l.startswith("#")]
cid = {c: i for i, c in enumerate(concepts)}

product = {}
for line in open("catalog.jsonl"):
    rec = json.loads(line)
    hits = [p for p in rec["category"] if p in cid]
    if hits:
        product[rec["product_id"]] = hits[-1]

freq = Counter()
co = defaultdict(Counter)
for line in open("behavior.jsonl"):
    rec = json.loads(line)
    x = product.get(rec["product_id"])
    if x is None:
        continue
    freq[x] += 1
    for y in {product[p] for p in rec["also_buy"] if p in product}:
        if y != x:
            co[x][y] += 1

out = []
for x in sorted(freq, key=cid.get):
    out.append(f"freq\t{x}\t{freq[x]}")
for x in sorted(co, key=cid.get):
    for y in sorted(co[x], key=cid.get):
        out.append(f"cofreq\t{x}\t{y}\t{co[x][y]}\t{co[x][y] / freq[x]:.6f}")
for x in sorted(freq, key=cid.get):
    if freq[x] < MIN_FREQ or len(co[x]) < K_COLLECT:
        continue
    ranked = sorted(co[x], key=lambda y: (-co[x][y] / freq[x], cid[y]))[:K_COLLECT]
    for i, y in enumerate(ranked, 1):
        out.append(f"list\t{x}\t{i}\t{y}\t{co[x][y] / freq[x]:.6f}")

with open("golden_table.txt", "w") as f:
    f.write("\n".join(out) + "\n")

# Brute-force report for predictions.jsonl with k=2 over positions 1..3.
K, M = 2, 3


def rank(x, y):
    if y is None or co[x][y] == 0:
        return None
    order = sorted(co[x], key=lambda c: (-co[x][c] / freq[x], cid[c]))
    return order.index(y) + 1


records = [json.loads(l) for l in open("predictions.jsonl")][1:]
slots = []
for r in records:
    s = {}
    for sl in r["slots"]:
        s[sl["position"]] = sl["concept"] if sl["concept"] in cid else None
    slots.append((r["input"], s, len(r["slots"])))


def hit(x, s, m):
    y = s.get(m)
    if y is None:
        return 0
    if any(s.get(i) == y for i in range(1, m)):
        return 0
    r = rank(x, y)
    return 1 if r is not None and r <= K else 0


acc = {}
for m in range(1, M + 1):
    acc[str(m)] = sum(hit(x, s, m) for x, s, _ in slots) / len(slots)
overall = 0.0
for m in range(1, M + 1):
    overall += acc[str(m)]
overall /= M

ndcg_sum = 0.0
for x, s, _ in slots:
    gold = sorted(co[x], key=lambda c: (-co[x][c] / freq[x], cid[c]))[:M]
    idcg = 0.0
    for i in range(1, M + 1):
        idcg += (co[x][gold[i - 1]] / freq[x]) / math.log2(i + 1.0)
    dcg = 0.0
    for i in range(1, M + 1):
        y = s.get(i)
        w = 0.0
        if y is not None and not any(s.get(j) == y for j in range(1, i)):
            w = co[x][y] / freq[x]
        dcg += w / math.log2(i + 1.0)
    ndcg_sum += dcg / idcg

total = sum(n for _, _, n in slots)
valid = sum(1 for _, s, _ in slots for v in s.values() if v is not None)
report = {
    "name": "golden",
    "mode": "plain",
    "k": K,
    "n_test": len(slots),
    "ndcg_m": M,
    "acc_at_k": acc,
    "overall": overall,
    "ndcg": ndcg_sum / len(slots),
    "valid_rate": valid / total,
}
with open("golden_report.json", "w") as f:
    json.dump(report, f, indent=1, sort_keys=True)
    f.write("\n")
