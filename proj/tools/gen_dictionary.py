#!/usr/bin/env python3
"""Regenerates data/dictionary.tsv from the wordfreq English frequency list.

Counts are per-billion frequencies rounded to integers. Local place names and
a few emergency-domain words are appended with a fixed count so they are not treated as
misspellings.
"""
import argparse
import re

from wordfreq import top_n_list, word_frequency

LOCAL_WORDS = [
    "powai", "lucene", "andheri", "bandra", "dadar", "colaba", "juhu", "kurla",
    "worli", "vikhroli", "ghatkopar", "borivali", "malad", "thane", "chembur",
    "mulund", "goregaon", "santacruz", "sion", "matunga", "byculla", "vashi",
    "churchgate", "parel", "mahim", "versova", "kandivali", "dahisar",
    "bhandup", "mumbai", "hiranandani", "marol", "saki", "naka", "lokhandwala",
    "pune", "bkc",
]

DOMAIN_WORDS = [
    "urgently", "tremor", "tremors", "webinar", "firefighters", "evacuate",
    "evacuated", "stampede", "landslide", "aftershock", "aftershocks",
    "looted", "snatched", "snatching", "derailed", "collapsed", "smouldering",
]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=15000)
    ap.add_argument("--out", default="data/dictionary.tsv")
    ap.add_argument("--exclude", default="data/normalization.tsv",
                    help="normalization map whose source forms are not dictionary words")
    args = ap.parse_args()

    excluded = set()
    with open(args.exclude, encoding="utf-8") as f:
        for line in f:
            excluded.add(line.split("\t", 1)[0])

    words = {}
    for w in top_n_list("en", args.size * 2):
        if len(words) >= args.size:
            break
        if w in excluded:
            continue
        if re.search(r"(.)\1\1", w):
            continue  # not a plausible English spelling
        if re.fullmatch(r"[a-z]+", w) and (len(w) > 1 or w in ("a", "i")):
            words[w] = max(1, round(word_frequency(w, "en") * 1e9))
    for w in LOCAL_WORDS + DOMAIN_WORDS:
        words.setdefault(w, 5000)

    with open(args.out, "w", encoding="utf-8") as f:
        for w, c in words.items():
            f.write(f"{w}\t{c}\n")


if __name__ == "__main__":
    main()
