#!/usr/bin/env python3
# Copyright 2026 The pathnas Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Builds the Countries S1/S2/S3 link-prediction splits.

Input is the countries.json file of the `world-countries` npm package
(mledoze/countries). Output layout: <out>/S{1,2,3}/{train,valid,test}.txt,
tab-separated (subject, relation, object).

Construction:
  * facts: neighbor(c, c') for bordering countries, locatedin(c, subregion),
    locatedin(c, region), locatedin(subregion, region);
  * 10% of countries become test, 10% valid; each of them has at least one
    bordering country in the training partition;
  * valid/test hold locatedin(c, region) for their countries;
  * S1 removes locatedin(c, region) for valid/test countries;
  * S2 also removes locatedin(c, subregion) for valid/test countries;
  * S3 also removes locatedin(n, region) for every neighbor n of a
    valid/test country.
"""

import argparse
import json
import os
import random


def slug(name):
    return name.lower().replace(" ", "_").replace("-", "_")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("countries_json")
    ap.add_argument("out")
    ap.add_argument("--seed", type=int, default=1234)
    args = ap.parse_args()

    raw = json.load(open(args.countries_json, encoding="utf-8"))
    raw = [c for c in raw if c["region"] and c["region"] != "Antarctic"]
    code_to_name = {c["cca3"]: slug(c["name"]["common"]) for c in raw}
    country = {code_to_name[c["cca3"]]: c for c in raw}
    names = sorted(country)

    neighbors = {n: sorted({code_to_name[b] for b in country[n]["borders"]
                            if b in code_to_name}) for n in names}
    region = {n: slug(country[n]["region"]) for n in names}
    subregion = {n: slug(country[n]["subregion"]) for n in names}

    rng = random.Random(args.seed)
    n_hold = round(0.1 * len(names))
    while True:
        pool = [n for n in names if neighbors[n]]
        rng.shuffle(pool)
        test = sorted(pool[:n_hold])
        valid = sorted(pool[n_hold:2 * n_hold])
        held = set(test) | set(valid)
        if all(any(m not in held for m in neighbors[n]) for n in held):
            break

    base = []
    for n in names:
        for m in neighbors[n]:
            base.append((n, "neighbor", m))
        base.append((n, "locatedin", subregion[n]))
        base.append((n, "locatedin", region[n]))
    for s in sorted(set(subregion.values())):
        r = next(region[n] for n in names if subregion[n] == s)
        base.append((s, "locatedin", r))

    held = set(test) | set(valid)
    drop1 = {(n, "locatedin", region[n]) for n in held}
    drop2 = drop1 | {(n, "locatedin", subregion[n]) for n in held}
    drop3 = drop2 | {(m, "locatedin", region[m])
                     for n in held for m in neighbors[n]}
    splits = {"S1": drop1, "S2": drop2, "S3": drop3}

    for task, drop in splits.items():
        d = os.path.join(args.out, task)
        os.makedirs(d, exist_ok=True)
        with open(os.path.join(d, "train.txt"), "w", encoding="utf-8") as f:
            for t in base:
                if t not in drop:
                    f.write("\t".join(t) + "\n")
        for split, members in (("valid", valid), ("test", test)):
            with open(os.path.join(d, split + ".txt"), "w",
                      encoding="utf-8") as f:
                for n in members:
                    f.write(f"{n}\tlocatedin\t{region[n]}\n")


if __name__ == "__main__":
    main()
