#!/usr/bin/env python3
"""Regenerates the bundled desk-scale assets under data/.

Writes the synthetic review mini-corpus and the lexicon files it is built
from. Output is deterministic for a fixed --seed, so the checked-in files can
be reproduced byte for byte:

    python3 tools/gen_assets.py --out data --seed 7
"""

import argparse
import os
import random

# Synsets of interchangeable words. Every member must be unique across sets.
NEUTRAL_SYNSETS = [
    ["restaurant", "eatery", "diner", "bistro"],
    ["food", "cuisine", "fare"],
    ["staff", "crew", "team", "employees"],
    ["meal", "dinner", "supper"],
    ["dish", "plate", "course"],
    ["menu", "selection", "offering"],
    ["movie", "film", "picture"],
    ["actors", "cast", "performers"],
    ["story", "plot", "narrative"],
    ["director", "filmmaker"],
    ["scene", "sequence", "segment"],
    ["hotel", "inn", "lodge", "resort"],
    ["room", "suite", "chamber"],
    ["bed", "mattress"],
    ["book", "novel", "volume"],
    ["author", "writer", "novelist"],
    ["chapter", "section", "part"],
    ["phone", "device", "handset", "gadget"],
    ["battery", "charge"],
    ["screen", "display", "panel"],
    ["concert", "show", "performance", "gig"],
    ["band", "ensemble", "group"],
    ["music", "songs", "tunes"],
    ["trip", "journey", "voyage", "visit"],
    ["city", "town", "village"],
    ["guide", "host", "leader"],
    ["game", "title"],
    ["controls", "buttons", "inputs"],
    ["people", "folks", "visitors", "guests"],
    ["friends", "pals", "companions"],
    ["family", "relatives", "kin"],
    ["very", "really", "truly", "quite"],
    ["many", "numerous", "several"],
    ["large", "big", "huge", "vast"],
    ["small", "little", "tiny"],
    ["new", "recent", "fresh"],
    ["old", "aged", "ancient"],
    ["quickly", "rapidly", "swiftly"],
    ["place", "spot", "venue", "location"],
    ["time", "moment", "period"],
    ["price", "cost", "fee"],
    ["arrived", "came", "showed"],
    ["visited", "toured", "explored"],
    ["bought", "purchased", "acquired"],
    ["seemed", "looked", "felt"],
    ["tried", "tested", "sampled"],
    ["watched", "viewed", "saw"],
    ["overall", "generally", "mostly"],
    ["experience", "outing", "occasion"],
    ["week", "month", "season"],
    ["street", "road", "avenue"],
    ["near", "beside", "by"],
    ["started", "began", "opened"],
    ["finished", "ended", "closed"],
    ["evening", "night"],
    ["morning", "dawn"],
    ["decided", "chose", "opted"],
    ["waited", "lingered", "stayed"],
    ["ordered", "requested", "asked"],
    ["noticed", "observed", "spotted"],
    ["walked", "strolled", "wandered"],
    ["talked", "chatted", "spoke"],
    ["idea", "notion", "concept"],
    ["details", "features", "touches"],
    ["area", "region", "district"],
    ["nearby", "close", "adjacent"],
    ["main", "central", "primary"],
    ["second", "next", "following"],
    ["also", "additionally", "moreover"],
    ["afterwards", "later", "then"],
    ["owner", "proprietor", "manager"],
]

# Member-wise antonym pairs: POSITIVE[i][j] <-> NEGATIVE[i][j].
POSITIVE_SYNSETS = [
    ["good", "great", "fine"],
    ["excellent", "superb", "outstanding"],
    ["pleasant", "enjoyable", "delightful"],
    ["friendly", "welcoming", "kind"],
    ["clean", "tidy", "spotless"],
    ["loved", "adored", "enjoyed"],
    ["happy", "pleased", "glad"],
    ["beautiful", "lovely", "gorgeous"],
    ["impressive", "remarkable", "brilliant"],
    ["recommend", "endorse", "praise"],
    ["fast", "speedy", "prompt"],
    ["comfortable", "cozy", "relaxing"],
    ["tasty", "delicious", "flavorful"],
    ["best", "finest", "greatest"],
]
NEGATIVE_SYNSETS = [
    ["bad", "awful", "poor"],
    ["terrible", "dreadful", "horrible"],
    ["unpleasant", "tedious", "dreary"],
    ["rude", "hostile", "cold"],
    ["dirty", "messy", "filthy"],
    ["hated", "loathed", "disliked"],
    ["unhappy", "annoyed", "upset"],
    ["ugly", "hideous", "unsightly"],
    ["disappointing", "mediocre", "dismal"],
    ["avoid", "shun", "criticize"],
    ["slow", "sluggish", "tardy"],
    ["uncomfortable", "cramped", "stressful"],
    ["bland", "stale", "tasteless"],
    ["worst", "poorest", "weakest"],
]

# Hostile-statement templates for the spoofing attack. Group names are
# fictional so the bundled data carries no real-world targets.
HATE_TEMPLATES = [
    "[GROUP] should never be trusted with anything .",
    "everyone knows [GROUP] ruin every community they enter .",
    "[GROUP] are a disgrace and deserve nothing .",
    "no one should ever hire [GROUP] for any job .",
    "why do we keep tolerating [GROUP] in this country ?",
    "[GROUP] are worthless parasites who poison everything .",
    "it is disgusting how [GROUP] think they belong here .",
    "keep [GROUP] away from our schools and homes .",
]
GROUPS = [
    "the zorvians", "the quellish", "the marrowfolk", "the tessarines",
    "the ombrites", "the velani", "the druskers", "the pallians",
    "the korrin", "the ashlanders", "the nivvites", "the sarrowmen",
]

# Slots: N:<head> picks a member of the neutral synset whose first word is
# <head>; P:<head>/Q:<head> picks a polarity word in the doc's sentiment
# (P) or the opposite sentiment (Q), where <head> is a positive head word.
DOMAINS = {
    "restaurant": {
        "intro": [
            "last {N:week} we {N:visited} the {N:new} {N:restaurant} on the {N:main} {N:street} with a few {N:friends} .",
            "the {N:restaurant} {N:started} serving {N:food} in the {N:area} a {N:small} {N:time} ago .",
            "we {N:arrived} in the {N:evening} and {N:waited} for a table {N:near} the window .",
            "my {N:family} {N:decided} to try the {N:menu} after a {N:second} {N:visit} to the {N:city} .",
        ],
        "body": [
            "the {N:staff} were {P:friendly} and the {N:food} was {N:very} {P:tasty} .",
            "i {N:ordered} the {N:main} {N:dish} and it {N:seemed} {P:excellent} for the {N:price} .",
            "the {N:room} was {P:clean} and the {N:music} was {P:pleasant} .",
            "service was {P:fast} and the {N:owner} {N:talked} with every table .",
            "the {N:menu} had {N:many} {N:dish} options and each {N:plate} was {P:good} .",
            "we {N:noticed} the {N:details} in every {N:course} and {P:loved} the {N:idea} .",
        ],
        "verdict": [
            "{N:overall} it was a {P:good} {N:experience} and i would {P:recommend} the {N:place} to {N:people} .",
            "this is the {P:best} {N:restaurant} in the {N:area} and we were {P:happy} .",
            "{N:afterwards} we {N:walked} home feeling {P:happy} about a {P:great} {N:meal} .",
        ],
    },
    "movie": {
        "intro": [
            "we {N:watched} the {N:new} {N:movie} at the {N:main} {N:place} in {N:town} last {N:week} .",
            "the {N:director} {N:started} work on this {N:movie} a {N:large} {N:time} ago .",
            "my {N:friends} {N:decided} to see the {N:movie} on a {N:week} {N:evening} .",
            "the {N:movie} {N:opened} with a {N:small} {N:scene} {N:near} the {N:old} {N:street} .",
        ],
        "body": [
            "the {N:actors} were {P:impressive} and the {N:story} {N:seemed} {P:pleasant} .",
            "each {N:scene} was {P:beautiful} and the {N:music} was {N:very} {P:excellent} .",
            "the {N:director} made the {N:plot} {P:enjoyable} with {N:many} {P:remarkable} {N:details} .",
            "the {N:second} {N:part} of the {N:movie} {N:seemed} {P:great} and {P:fast} .",
            "we {P:loved} the {N:main} {N:actors} and the {N:idea} behind the {N:story} .",
            "the {N:screen} {N:looked} {P:beautiful} and the seats were {P:comfortable} .",
        ],
        "verdict": [
            "{N:overall} it is the {P:best} {N:movie} of the {N:season} and i {P:recommend} it .",
            "we {N:finished} the {N:evening} {P:happy} and the {N:movie} was {P:good} .",
            "{N:afterwards} we {N:talked} about the {P:excellent} {N:story} for a {N:large} {N:time} .",
        ],
    },
    "hotel": {
        "intro": [
            "we {N:arrived} at the {N:hotel} {N:near} the {N:main} {N:street} in the {N:evening} .",
            "the {N:hotel} {N:opened} in the {N:old} {N:area} of the {N:city} a {N:small} {N:time} ago .",
            "my {N:family} {N:decided} to stay at the {N:hotel} during a {N:week} {N:trip} .",
            "the {N:guide} {N:walked} us from the {N:nearby} {N:street} to the {N:hotel} .",
        ],
        "body": [
            "the {N:room} was {P:clean} and the {N:bed} was {N:very} {P:comfortable} .",
            "the {N:staff} were {P:friendly} and check in was {P:fast} .",
            "the {N:view} from the {N:room} was {P:beautiful} in the {N:morning} .",
            "breakfast was {P:tasty} and the {N:menu} had {N:many} {P:good} options .",
            "we {N:noticed} {N:many} {P:impressive} {N:details} in the {N:large} lobby .",
            "the {N:owner} {N:talked} with {N:guests} and {N:seemed} {P:happy} to help .",
        ],
        "verdict": [
            "{N:overall} it was a {P:great} {N:experience} and i would {P:recommend} the {N:hotel} .",
            "this is the {P:best} {N:hotel} in the {N:city} and we were {P:happy} .",
            "{N:afterwards} we {N:finished} the {N:trip} feeling {P:happy} about a {P:pleasant} stay .",
        ],
    },
    "book": {
        "intro": [
            "i {N:bought} the {N:new} {N:book} from a {N:small} shop on the {N:main} {N:street} .",
            "the {N:author} {N:started} writing this {N:book} a {N:large} {N:time} ago .",
            "my {N:friends} {N:decided} to read the {N:book} together last {N:month} .",
            "the {N:book} {N:opened} with a {N:small} {N:chapter} about an {N:old} {N:city} .",
        ],
        "body": [
            "the {N:author} wrote a {P:beautiful} {N:story} with {N:many} {P:remarkable} {N:details} .",
            "each {N:chapter} was {P:enjoyable} and the {N:plot} moved {P:fast} .",
            "the {N:main} characters {N:seemed} {P:impressive} and the {N:idea} was {P:excellent} .",
            "i {P:loved} the {N:second} {N:part} and the ending was {P:good} .",
            "the {N:writer} made every {N:section} {P:pleasant} to read .",
            "the {N:narrative} {N:looked} {P:great} and the prose was {N:very} {P:beautiful} .",
        ],
        "verdict": [
            "{N:overall} it is the {P:best} {N:book} of the {N:season} and i {P:recommend} it .",
            "i {N:finished} the {N:book} {P:happy} and the {N:story} was {P:great} .",
            "{N:afterwards} we {N:talked} about the {P:excellent} {N:author} for a {N:large} {N:time} .",
        ],
    },
    "phone": {
        "intro": [
            "i {N:bought} the {N:new} {N:phone} from a {N:large} shop in the {N:city} last {N:week} .",
            "the {N:phone} {N:arrived} in a {N:small} box on a {N:week} {N:morning} .",
            "my {N:family} {N:decided} to try the {N:phone} after an {N:old} {N:device} {N:finished} working .",
            "the {N:owner} of the shop {N:talked} about the {N:phone} for a {N:small} {N:time} .",
        ],
        "body": [
            "the {N:screen} was {P:beautiful} and the {N:battery} {N:seemed} {N:very} {P:good} .",
            "the {N:phone} was {P:fast} and the {N:controls} were {P:comfortable} to use .",
            "i {N:noticed} {N:many} {P:impressive} {N:details} in the {N:main} menu .",
            "the {N:display} {N:looked} {P:excellent} and the {N:price} {N:seemed} {P:fine} .",
            "i {P:loved} the {N:idea} of a {N:small} {N:device} with a {N:large} {N:screen} .",
            "the {N:music} sounded {P:pleasant} and the {N:battery} lasted all {N:evening} .",
        ],
        "verdict": [
            "{N:overall} it is the {P:best} {N:phone} i have {N:tried} and i {P:recommend} it .",
            "i was {P:happy} with the {N:phone} and the {N:experience} was {P:great} .",
            "{N:afterwards} i {N:talked} with {N:friends} about the {P:excellent} {N:device} .",
        ],
    },
    "concert": {
        "intro": [
            "we {N:arrived} at the {N:concert} in the {N:main} {N:area} of {N:town} in the {N:evening} .",
            "the {N:band} {N:started} the {N:concert} a {N:small} {N:time} after sunset .",
            "my {N:friends} {N:decided} to see the {N:band} on a {N:week} {N:trip} to the {N:city} .",
            "the {N:venue} {N:opened} in an {N:old} building {N:near} the {N:main} {N:street} .",
        ],
        "body": [
            "the {N:band} was {P:impressive} and the {N:music} was {N:very} {P:beautiful} .",
            "each {N:song} {N:seemed} {P:enjoyable} and the crowd was {P:friendly} .",
            "the {N:sound} was {P:excellent} and the {N:performers} {N:looked} {P:happy} .",
            "we {P:loved} the {N:second} {N:part} of the {N:show} and the {N:tunes} were {P:great} .",
            "the {N:venue} was {P:clean} and the seats were {P:comfortable} .",
            "{N:many} {N:people} {N:noticed} the {P:remarkable} {N:details} of the stage .",
        ],
        "verdict": [
            "{N:overall} it was the {P:best} {N:concert} of the {N:season} and i {P:recommend} it .",
            "we {N:finished} the {N:evening} {P:happy} about a {P:great} {N:show} .",
            "{N:afterwards} we {N:talked} about the {P:excellent} {N:band} for a {N:large} {N:time} .",
        ],
    },
    "travel": {
        "intro": [
            "we {N:visited} the {N:old} {N:city} on a {N:week} {N:trip} with our {N:family} .",
            "the {N:trip} {N:started} in a {N:small} {N:town} {N:near} the coast .",
            "my {N:friends} {N:decided} to take the {N:journey} in the {N:morning} .",
            "our {N:guide} {N:walked} with us through the {N:main} {N:area} of the {N:city} .",
        ],
        "body": [
            "the {N:guide} was {P:friendly} and the {N:tour} {N:seemed} {P:enjoyable} .",
            "the {N:streets} were {P:clean} and the {N:views} were {N:very} {P:beautiful} .",
            "we {N:explored} {N:many} {P:impressive} {N:places} and the {N:food} was {P:tasty} .",
            "the {N:second} {N:part} of the {N:trip} was {P:great} and the bus was {P:comfortable} .",
            "we {P:loved} the {N:idea} of walking the {N:old} {N:street} at {N:night} .",
            "the {N:people} in the {N:town} {N:looked} {P:happy} and {P:welcoming} .",
        ],
        "verdict": [
            "{N:overall} it was the {P:best} {N:trip} of the {N:season} and i {P:recommend} it .",
            "we {N:finished} the {N:journey} {P:happy} and the {N:experience} was {P:excellent} .",
            "{N:afterwards} we {N:talked} about the {P:pleasant} {N:city} for a {N:large} {N:time} .",
        ],
    },
    "game": {
        "intro": [
            "i {N:bought} the {N:new} {N:game} last {N:week} after {N:friends} {N:talked} about it .",
            "the {N:game} {N:started} with a {N:small} {N:scene} in an {N:old} {N:city} .",
            "my {N:family} {N:decided} to play the {N:game} on a {N:week} {N:evening} .",
            "the {N:main} {N:story} of the {N:game} {N:opened} {N:near} a {N:large} castle .",
        ],
        "body": [
            "the {N:controls} were {P:comfortable} and the {N:game} was {N:very} {P:fast} .",
            "the {N:music} was {P:beautiful} and each {N:level} {N:seemed} {P:enjoyable} .",
            "the {N:story} was {P:impressive} with {N:many} {P:remarkable} {N:details} .",
            "i {P:loved} the {N:second} {N:part} and the {N:screen} {N:looked} {P:excellent} .",
            "the {N:characters} {N:seemed} {P:friendly} and the {N:idea} was {P:great} .",
            "the {N:price} was {P:fine} for such a {N:large} {N:title} .",
        ],
        "verdict": [
            "{N:overall} it is the {P:best} {N:game} of the {N:season} and i {P:recommend} it .",
            "i {N:finished} the {N:game} {P:happy} and the {N:experience} was {P:good} .",
            "{N:afterwards} i {N:talked} with {N:pals} about the {P:excellent} {N:title} .",
        ],
    },
}

# Extra synsets referenced only by templates.
EXTRA_SYNSETS = [
    ["view", "vista", "outlook"],
    ["views", "vistas", "sights"],
    ["tour", "excursion"],
    ["streets", "lanes", "roads"],
    ["places", "sites", "spots"],
    ["level", "stage", "round"],
    ["characters", "heroes", "figures"],
    ["song", "track", "number"],
    ["sound", "audio", "acoustics"],
]


def build_tables():
    synsets = NEUTRAL_SYNSETS + EXTRA_SYNSETS
    synsets += POSITIVE_SYNSETS + NEGATIVE_SYNSETS
    seen = {}
    for s in synsets:
        for w in s:
            assert w not in seen, f"duplicate synset member {w}"
            seen[w] = s
    pos_head = {w: i for i, s in enumerate(POSITIVE_SYNSETS) for w in s}
    return synsets, seen, pos_head


def fill(template, rng, syn_of, pos_head, sentiment, mix_rate):
    out = []
    for tok in template.split():
        if tok.startswith("{") and tok.endswith("}"):
            kind, head = tok[1:-1].split(":")
            if kind == "N":
                out.append(rng.choice(syn_of[head]))
            else:
                polar = sentiment
                if kind == "Q" or rng.random() < mix_rate:
                    polar = -polar
                idx = pos_head[head]
                table = POSITIVE_SYNSETS if polar > 0 else NEGATIVE_SYNSETS
                out.append(rng.choice(table[idx]))
        else:
            out.append(tok)
    return out


def make_doc(rng, syn_of, pos_head):
    domain = rng.choice(sorted(DOMAINS))
    parts = DOMAINS[domain]
    sentiment = rng.choice([1, -1])
    sentences = []
    for t in rng.sample(parts["intro"], 2):
        sentences.append(fill(t, rng, syn_of, pos_head, sentiment, 0.35))
    for t in rng.sample(parts["body"], 4):
        sentences.append(fill(t, rng, syn_of, pos_head, sentiment, 0.15))
    for t in rng.sample(parts["verdict"], 2):
        sentences.append(fill(t, rng, syn_of, pos_head, sentiment, 0.0))
    return " ".join(" ".join(s) for s in sentences)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--docs", type=int, default=500)
    args = ap.parse_args()

    synsets, syn_of, pos_head = build_tables()
    # Template heads that are not synset members resolve to themselves.
    for parts in DOMAINS.values():
        for group in parts.values():
            for t in group:
                for tok in t.split():
                    if tok.startswith("{N:"):
                        head = tok[3:-1]
                        if head not in syn_of:
                            raise SystemExit(f"unknown synset head {head}")

    rng = random.Random(args.seed)
    docs = [make_doc(rng, syn_of, pos_head) for _ in range(args.docs)]

    lex = os.path.join(args.out, "lexicons")
    os.makedirs(lex, exist_ok=True)
    os.makedirs(os.path.join(args.out, "corpus"), exist_ok=True)
    with open(os.path.join(args.out, "corpus", "mini_corpus.txt"), "w") as f:
        for d in docs:
            f.write(d + "\n")
    with open(os.path.join(lex, "synonyms.tsv"), "w") as f:
        for s in synsets:
            f.write("\t".join(s) + "\n")
    with open(os.path.join(lex, "polarity.tsv"), "w") as f:
        for ps, ns in zip(POSITIVE_SYNSETS, NEGATIVE_SYNSETS):
            for p, n in zip(ps, ns):
                f.write(f"{p}\t{n}\n")
    with open(os.path.join(lex, "hate_templates.txt"), "w") as f:
        for t in HATE_TEMPLATES:
            f.write(t + "\n")
    with open(os.path.join(lex, "groups.txt"), "w") as f:
        for g in GROUPS:
            f.write(g + "\n")


if __name__ == "__main__":
    main()
