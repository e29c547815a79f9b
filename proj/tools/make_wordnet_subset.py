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
"""Builds a small WN18RR-style link-prediction graph from WordNet data files.

Input is a WordNet `dict/` directory (data.noun, data.verb, data.adj,
data.adv; e.g. from the `wordnet-db` npm package). Only the eleven relation
types kept by WN18RR are used, so no relation has its inverse in the graph.
A connected sample of `--entities` synsets is grown by breadth-first search
and the induced triplets are split 90/5/5; valid/test triplets whose
entities never occur in train are moved to train.
"""

import argparse
import collections
import os
import random

POINTERS = {
    "@": "_hypernym",
    "@i": "_instance_hypernym",
    "+": "_derivationally_related_form",
    "^": "_also_see",
    "%m": "_member_meronym",
    "%p": "_has_part",
    ";c": "_synset_domain_topic_of",
    ";u": "_member_of_domain_usage",
    ";r": "_member_of_domain_region",
    "$": "_verb_group",
    "&": "_similar_to",
}


def read_synsets(dict_dir):
    triplets = set()
    for pos in ("noun", "verb", "adj", "adv"):
        with open(os.path.join(dict_dir, "data." + pos), encoding="latin-1") as f:
            for line in f:
                if line.startswith("  "):
                    continue
                fields = line.split("|")[0].split()
                offset, ss_type = fields[0], fields[2]
                n_words = int(fields[3], 16)
                i = 4 + 2 * n_words
                n_ptr = int(fields[i])
                i += 1
                for _ in range(n_ptr):
                    sym, tgt, tgt_pos = fields[i], fields[i + 1], fields[i + 2]
                    i += 4
                    rel = POINTERS.get(sym)
                    if rel is None:
                        continue
                    tgt_pos = "a" if tgt_pos == "s" else tgt_pos
                    src_pos = "a" if ss_type == "s" else ss_type
                    s, o = f"{offset}{src_pos}", f"{tgt}{tgt_pos}"
                    if s != o:
                        triplets.add((s, rel, o))
    return sorted(triplets)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("dict_dir")
    ap.add_argument("out")
    ap.add_argument("--entities", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    triplets = read_synsets(args.dict_dir)
    adj = collections.defaultdict(set)
    for s, _, o in triplets:
        adj[s].add(o)
        adj[o].add(s)

    rng = random.Random(args.seed)
    # Seed the walk at a well-connected synset so the sample stays dense.
    hubs = sorted(e for e in adj if len(adj[e]) >= 20)
    start = rng.choice(hubs)
    keep, frontier = {start}, collections.deque([start])
    while frontier and len(keep) < args.entities:
        cur = frontier.popleft()
        nxt = sorted(adj[cur] - keep)
        rng.shuffle(nxt)
        for e in nxt:
            if len(keep) >= args.entities:
                break
            keep.add(e)
            frontier.append(e)

    sub = [t for t in triplets if t[0] in keep and t[2] in keep]
    rng.shuffle(sub)
    n = len(sub)
    n_eval = n // 20
    test, valid, train = sub[:n_eval], sub[n_eval:2 * n_eval], sub[2 * n_eval:]
    seen = {e for s, _, o in train for e in (s, o)}
    seen_rel = {r for _, r, _ in train}

    def ok(t):
        return t[0] in seen and t[2] in seen and t[1] in seen_rel

    train += [t for t in test + valid if not ok(t)]
    test = [t for t in test if ok(t)]
    valid = [t for t in valid if ok(t)]

    os.makedirs(args.out, exist_ok=True)
    for name, rows in (("train", train), ("valid", valid), ("test", test)):
        with open(os.path.join(args.out, name + ".txt"), "w", encoding="utf-8") as f:
            for t in rows:
                f.write("\t".join(t) + "\n")


if __name__ == "__main__":
    main()
