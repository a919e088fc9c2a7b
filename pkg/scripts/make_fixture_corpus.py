"""Generate the bundled fixture corpus used by the pipeline tests.

Each release discovers vulnerabilities along a logistic ground truth with
Poisson monthly increments. Every third-party entry may reference a vendor
bug and is grouped into a monthly vendor advisory together with its bug.

    python scripts/make_fixture_corpus.py --out tests/data
"""
import argparse
import csv
import datetime as dt
from pathlib import Path

import numpy as np

from vdmeval.data import add_months

RELEASES = [
    # id, product, version, release date, total vulns, midpoint month, growth
    ("Acme-1.0", "Acme", "1.0", dt.date(2008, 12, 15), 90, 10.0, 0.35),
    ("Acme-2.0", "Acme", "2.0", dt.date(2009, 6, 20), 70, 9.0, 0.40),
    ("Brio-3.0", "Brio", "3.0", dt.date(2009, 11, 2), 60, 8.0, 0.45),
]
COLLECTION_DATE = dt.date(2011, 7, 1)


def logistic(t, total, mid, rate):
    return total / (1.0 + np.exp(-rate * (t - mid)))


def generate(seed: int = 2012):
    rng = np.random.default_rng(seed)
    tadv, bugs, advisories = [], [], {}
    cve = 1000
    bug = 50000
    previous = {}
    for rid, product, _, rdate, total, mid, rate in RELEASES:
        months = 0
        while add_months(rdate, months + 1) <= COLLECTION_DATE:
            months += 1
        curve = logistic(np.arange(0, months + 1), total, mid, rate)
        increments = rng.poisson(np.diff(curve))
        for m, k in enumerate(increments, 1):
            lo = add_months(rdate, m - 1)
            span = (add_months(rdate, m) - lo).days
            for _ in range(int(k)):
                day = lo + dt.timedelta(days=int(rng.integers(1, span + 1)))
                cve += 1
                cid = f"CVE-{day.year}-{cve}"
                rels = [rid]
                if product in previous and rng.random() < 0.3:
                    rels.append(previous[product])
                refs = []
                adv_key = f"{product}-{day.year}-{day.month:02d}"
                if rng.random() < 0.6:
                    bug += int(rng.integers(1, 40))
                    bdate = day - dt.timedelta(days=int(rng.integers(0, 20)))
                    bugs.append(("BUG", str(bug), bdate.isoformat(), "", "", ""))
                    refs.append(f"BUG:{bug}")
                    advisories.setdefault(adv_key, []).append((cid, str(bug)))
                elif rng.random() < 0.5:
                    advisories.setdefault(adv_key, []).append((cid, None))
                if adv_key in advisories and any(c == cid for c, _ in advisories[adv_key]):
                    refs.append(f"ADV:{adv_key}")
                tadv.append(("TADV", cid, day.isoformat(), ";".join(rels),
                             ";".join(refs), ""))
        previous[product] = rid

    adv_rows = []
    for key in sorted(advisories):
        refs, positions = [], []
        for group, (cid, bid) in enumerate(advisories[key], 1):
            refs.append(f"TADV:{cid}")
            positions.append(str(2 * group))
            if bid is not None:
                refs.append(f"BUG:{bid}")
                positions.append(str(2 * group))
        product, year, month = key.split("-")
        last = add_months(dt.date(int(year), int(month), 1), 1) - dt.timedelta(days=1)
        adv_rows.append(("ADV", key, last.isoformat(), "", ";".join(refs),
                         ";".join(positions)))
    return tadv + bugs + adv_rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="tests/data")
    ap.add_argument("--seed", type=int, default=2012)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "corpus_records.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["source", "id", "date", "releases", "refs", "advisory_positions"])
        w.writerows(generate(args.seed))
    with open(out / "corpus_manifest.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["release", "date", "product", "version"])
        for rid, product, version, rdate, *_ in RELEASES:
            w.writerow([rid, rdate.isoformat(), product, version])
    print(f"collection date: {COLLECTION_DATE.isoformat()}")


if __name__ == "__main__":
    main()
