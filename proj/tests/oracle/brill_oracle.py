#!/usr/bin/env python3
"""Reference Penn Treebank tagger used to freeze expected tags for the C++ tests.

The tagging procedure (lexicon lookup, morphology rules for unknown words,
contextual rules, then a second contextual pass with the supplementary rules)
is a direct transcription of the Brill-style tagger in the
Pattern library (pattern.text: find_tags, Morphology.apply, Context.apply),
BSD-licensed, Copyright (c) 2011-2013 University of Antwerp. It reads the same
data files the library ships under data/pos/.

Usage: brill_oracle.py SENTENCE [SENTENCE ...]
Prints one line per sentence: token/TAG pairs separated by spaces.
"""

import os
import re
import sys

DATA = os.path.join(os.path.dirname(__file__), "..", "..", "data", "pos")


def _read(name):
    with open(os.path.join(DATA, name), encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith(";;;"):
                continue
            yield line


LEXICON = {}
for line in _read("lexicon.txt"):
    parts = line.split(" ")[:2]
    if len(parts) == 2:
        LEXICON[parts[0]] = parts[1]
MORPHOLOGY = [line.split() for line in _read("morphology.txt")]
CONTEXT = [line.split() for line in _read("context.txt")]
SUPPLEMENT = [line.split() for line in _read("context-supplement.txt")]

MORPH_CMDS = {"word", "char", "haspref", "hassuf", "addpref", "addsuf",
              "deletepref", "deletesuf", "goodleft", "goodright"}
MORPH_CMDS |= {"f" + c for c in list(MORPH_CMDS)}
CD = re.compile(r"^[0-9\-\,\.\:\/\%\$]+$")


def morphology_apply(token, previous, nxt):
    w = token[0]
    for r in MORPHOLOGY:
        if r[1] in MORPH_CMDS:
            f, x, pos, cmd = False, r[0], r[-2], r[1].lower()
        if r[2] in MORPH_CMDS:
            f, x, pos, cmd = True, r[1], r[-2], r[2].lower().lstrip("f")
        if f and token[1] != r[0]:
            continue
        if (cmd == "word" and x == w) \
                or (cmd == "char" and x in w) \
                or (cmd == "haspref" and w.startswith(x)) \
                or (cmd == "hassuf" and w.endswith(x)) \
                or (cmd == "addpref" and x + w in LEXICON) \
                or (cmd == "addsuf" and w + x in LEXICON) \
                or (cmd == "deletepref" and w.startswith(x) and w[len(x):] in LEXICON) \
                or (cmd == "deletesuf" and w.endswith(x) and w[:-len(x)] in LEXICON) \
                or (cmd == "goodleft" and x == nxt[0]) \
                or (cmd == "goodright" and x == previous[0]):
            token[1] = pos
    return token


def context_apply(tokens, rules):
    o = [("STAART", "STAART")] * 3
    t = o + tokens + o
    for i, token in enumerate(t):
        for r in rules:
            if token[1] == "STAART":
                continue
            if token[1] != r[0] and r[0] != "*":
                continue
            cmd, x, y = r[2], r[3], r[4] if len(r) > 4 else ""
            cmd = cmd.lower()
            if (cmd == "prevtag" and x == t[i - 1][1]) \
                    or (cmd == "nexttag" and x == t[i + 1][1]) \
                    or (cmd == "prev2tag" and x == t[i - 2][1]) \
                    or (cmd == "next2tag" and x == t[i + 2][1]) \
                    or (cmd == "prev1or2tag" and x in (t[i - 1][1], t[i - 2][1])) \
                    or (cmd == "next1or2tag" and x in (t[i + 1][1], t[i + 2][1])) \
                    or (cmd == "prev1or2or3tag" and x in (t[i - 1][1], t[i - 2][1], t[i - 3][1])) \
                    or (cmd == "next1or2or3tag" and x in (t[i + 1][1], t[i + 2][1], t[i + 3][1])) \
                    or (cmd == "surroundtag" and x == t[i - 1][1] and y == t[i + 1][1]) \
                    or (cmd == "curwd" and x == t[i + 0][0]) \
                    or (cmd == "prevwd" and x == t[i - 1][0]) \
                    or (cmd == "nextwd" and x == t[i + 1][0]) \
                    or (cmd == "prev1or2wd" and x in (t[i - 1][0], t[i - 2][0])) \
                    or (cmd == "next1or2wd" and x in (t[i + 1][0], t[i + 2][0])) \
                    or (cmd == "prevwdtag" and x == t[i - 1][0] and y == t[i - 1][1]) \
                    or (cmd == "nextwdtag" and x == t[i + 1][0] and y == t[i + 1][1]) \
                    or (cmd == "wdprevtag" and x == t[i - 1][1] and y == t[i + 0][0]) \
                    or (cmd == "wdnexttag" and x == t[i + 0][0] and y == t[i + 1][1]) \
                    or (cmd == "wdand2aft" and x == t[i + 0][0] and y == t[i + 2][0]) \
                    or (cmd == "wdand2tagbfr" and x == t[i - 2][1] and y == t[i + 0][0]) \
                    or (cmd == "wdand2tagaft" and x == t[i + 0][0] and y == t[i + 2][1]) \
                    or (cmd == "lbigram" and x == t[i - 1][0] and y == t[i + 0][0]) \
                    or (cmd == "rbigram" and x == t[i + 0][0] and y == t[i + 1][0]) \
                    or (cmd == "prevbigram" and x == t[i - 2][1] and y == t[i - 1][1]) \
                    or (cmd == "nextbigram" and x == t[i + 1][1] and y == t[i + 2][1]):
                t[i] = [t[i][0], r[1]]
    return t[len(o):-len(o)]


def find_tags(tokens):
    tagged = []
    for i, token in enumerate(tokens):
        tagged.append([token, LEXICON.get(token, i == 0 and LEXICON.get(token.lower()) or None)])
    for i, (token, tag) in enumerate(tagged):
        prev, nxt = (None, None), (None, None)
        if i > 0:
            prev = tagged[i - 1]
        if i < len(tagged) - 1:
            nxt = tagged[i + 1]
        if tag is None:
            if token.istitle():
                tagged[i] = [token, "NNP"]
            elif CD.match(token) is not None:
                tagged[i] = [token, "CD"]
            else:
                tagged[i] = morphology_apply([token, "NN"], prev, nxt)
    return context_apply(context_apply(tagged, CONTEXT), SUPPLEMENT)


TOKEN = re.compile(r"'s\b|'\w+|\w+(?:[-']\w+)*(?='s\b)|\w+(?:[-']\w+)*|[^\w\s]")


def tokenize(text):
    return TOKEN.findall(text)


def tag_text(text):
    out, sentence = [], []
    for tok in tokenize(text):
        sentence.append(tok)
        if tok in (".", "!", "?"):
            out.extend(find_tags(sentence))
            sentence = []
    if sentence:
        out.extend(find_tags(sentence))
    return out


if __name__ == "__main__":
    for arg in sys.argv[1:]:
        print(" ".join(f"{w}/{t}" for w, t in tag_text(arg)))
