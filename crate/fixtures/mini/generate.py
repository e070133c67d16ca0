"""Builds the bundled mini-corpus and its hand-checkable expected outputs.

Every article is one templated sentence, so each (article, party) pair gives
exactly one mention and its Stage 1 label and mock Stage 2 verdict are known
from the template alone. The expected table is computed here in plain Python
(scipy only for the t distribution) without touching the Rust code.

    python3 generate.py   # rewrites corpus.jsonl and expected_*.tsv / .json
"""

import json
import math
import re
from datetime import date, timedelta
from pathlib import Path

from scipy import stats

HERE = Path(__file__).resolve().parent

# kind -> (template, stage1 biased, on target, sentiment)
TEMPLATES = {
    "neutral": ("{p} announced new plans for the Senedd election campaign.", False, None, None),
    "strong_neg": ("Critics branded {p} reckless, chaotic and toxic over the Senedd budget.", True, 1, -1.0),
    "neg": ("The divisive and reckless {p} plan was called brilliant by the Senedd business lobby.", True, 1, -0.5),
    "zero": ("The {p} landmark plan was called reckless by rivals in the Senedd.", True, 1, 0.0),
    "pos": ("{p} won praise for a brilliant and visionary Senedd housing plan.", True, 1, 1.0),
    "half_pos": ("The landmark {p} plan was brilliant, though one rival said it was reckless and inspiring.", True, 1, 0.5),
    "speaker": ("{p} criticised the devastating and disastrous Senedd budget cuts.", True, 0, None),
}

PLAN = {
    ("Reform UK", "news"): {"neutral": 6, "strong_neg": 4, "neg": 2, "zero": 1, "speaker": 2},
    ("Plaid Cymru", "news"): {"neutral": 8, "strong_neg": 1, "neg": 1, "zero": 2, "pos": 2, "half_pos": 1, "speaker": 3},
    ("Labour", "news"): {"neutral": 4, "strong_neg": 2, "neg": 2, "zero": 2, "pos": 1, "speaker": 2},
    ("Conservatives", "news"): {"neutral": 4, "strong_neg": 3, "neg": 1, "zero": 1, "pos": 2, "speaker": 1},
}
for party in ["Reform UK", "Plaid Cymru", "Labour", "Conservatives"]:
    PLAN[(party, "opinion")] = {"neutral": 2, "strong_neg": 2, "neg": 1, "pos": 1, "half_pos": 1, "speaker": 1}

# Extra articles that must not move the primary counts, plus one that
# names both primary parties without loaded language.
TWO_PARTY = "Reform UK and Plaid Cymru both published manifestos for the Senedd election."
SHORT_ANCHOR = "Reform UK won. The chaotic and reckless scenes shocked observers in Cardiff Bay."
OUT_OF_RANGE = ("Reform UK", "strong_neg", date(2019, 5, 1))
OTHER_TYPE = ("Plaid Cymru", "strong_neg")

KEYWORDS = [
    line.strip()
    for line in (HERE / "../../crates/core/data/keywords.txt").read_text().splitlines()
    if line.strip() and not line.startswith("#")
]


def keywords_matched(text):
    found = set()
    for kw in KEYWORDS:
        if re.search(r"(?<!\w)" + re.escape(kw) + r"(?!\w)", text, re.I):
            found.add(kw.lower())
    return sorted(found)


def record(n, day, kind_type, text):
    return {
        "article_id": f"mini-{n:03d}",
        "url": f"https://news.example/mini/{n:03d}/",
        "published_at": day.isoformat(),
        "title": f"Mini story {n}",
        "body_html": f"<p>{text}</p>",
        "body_text": text,
        "article_type": kind_type,
        "keywords_matched": keywords_matched(f"Mini story {n}\n{text}"),
    }


def build():
    articles = []
    start = date(2025, 1, 6)
    n = 0
    for (party, article_type), kinds in PLAN.items():
        for kind, count in kinds.items():
            for _ in range(count):
                n += 1
                day = start + timedelta(days=(n * 3) % 300)
                articles.append(record(n, day, article_type, TEMPLATES[kind][0].format(p=party)))
    n += 1
    articles.append(record(n, date(2025, 6, 2), "news", TWO_PARTY))
    n += 1
    articles.append(record(n, date(2025, 6, 3), "news", SHORT_ANCHOR))
    n += 1
    party, kind, day = OUT_OF_RANGE
    articles.append(record(n, day, "news", TEMPLATES[kind][0].format(p=party)))
    n += 1
    party, kind = OTHER_TYPE
    articles.append(record(n, date(2025, 7, 1), "other", TEMPLATES[kind][0].format(p=party)))
    articles.sort(key=lambda a: (a["published_at"], a["article_id"]))
    return articles


def summary(party, article_type):
    kinds = PLAN[(party, article_type)]
    total = sum(kinds.values())
    if article_type == "news" and party in ("Reform UK", "Plaid Cymru"):
        total += 1  # the two-party article
    scores, off = [], 0
    for kind, count in kinds.items():
        _, biased, on_target, sentiment = TEMPLATES[kind]
        if not biased:
            continue
        if on_target:
            scores += [sentiment] * count
        else:
            off += count
    return {"total": total, "on_target": len(scores), "off_target": off, "scores": scores}


def fixed(x, dp):
    s = f"{x:.{dp}f}"
    return s[1:] if s.startswith("-") and set(s[1:]) <= set("0.") else s


def rate(count, total):
    return f"{count:,} ({fixed(100 * count / total, 1)}%)"


def p_value(p):
    return "p < 0.001" if p < 0.001 else f"p = {fixed(p, 3)}"


def primary_table(a_name, b_name):
    a, b = summary(a_name, "news"), summary(b_name, "news")
    x1, n1, x2, n2 = a["on_target"], a["total"], b["on_target"], b["total"]
    p1, p2 = x1 / n1, x2 / n2
    pool = (x1 + x2) / (n1 + n2)
    z = (p1 - p2) / math.sqrt(pool * (1 - pool) * (1 / n1 + 1 / n2))
    pz = math.erfc(abs(z) / math.sqrt(2))
    h = 2 * math.asin(math.sqrt(p1)) - 2 * math.asin(math.sqrt(p2))
    sa, sb = a["scores"], b["scores"]
    ma, mb = sum(sa) / len(sa), sum(sb) / len(sb)
    va = sum((x - ma) ** 2 for x in sa) / (len(sa) - 1)
    vb = sum((x - mb) ** 2 for x in sb) / (len(sb) - 1)
    df = len(sa) + len(sb) - 2
    sp = math.sqrt(((len(sa) - 1) * va + (len(sb) - 1) * vb) / df)
    t = (ma - mb) / (sp * math.sqrt(1 / len(sa) + 1 / len(sb)))
    pt = 2 * stats.t.sf(abs(t), df)
    d = (ma - mb) / sp
    strong = lambda s: sum(1 for x in s["scores"] if x == -1.0)
    rows = [
        f"\t{a_name}\t{b_name}",
        f"Total mentions\t{n1:,}\t{n2:,}",
        f"On-target biased (% of total)\t{rate(x1, n1)}\t{rate(x2, n2)}",
        f"Mean sentiment\t{fixed(ma, 3)}\t{fixed(mb, 3)}",
        f"Strongly negative (% of total)\t{rate(strong(a), n1)}\t{rate(strong(b), n2)}",
        f"Bias rate z-test\tz = {fixed(z, 2)}, {p_value(pz)}, h = {fixed(h, 2)}",
        f"Sentiment t-test\tt = {fixed(t, 2)}, {p_value(pt)}, d = {fixed(d, 2)}",
    ]
    return "\n".join(rows) + "\n", {"z": z, "p_z": pz, "h": h, "t": t, "p_t": pt, "d": d, "df": df}


def main():
    articles = build()
    with open(HERE / "corpus.jsonl", "w") as f:
        for a in articles:
            f.write(json.dumps(a, ensure_ascii=False) + "\n")
    table, values = primary_table("Reform UK", "Plaid Cymru")
    (HERE / "expected_primary_table.tsv").write_text(table)
    in_scope = [(p, t) for (p, t) in PLAN]
    expected = {
        "articles": len(articles),
        # one mention per templated article, two for the two-party article,
        # none for the short anchor
        "mentions": sum(sum(k.values()) for k in PLAN.values()) + 2 + 2,
        "mentions_in_date_range": sum(sum(k.values()) for k in PLAN.values()) + 2 + 1,
        "stage2_classified": sum(summary(p, t)["on_target"] + summary(p, t)["off_target"] for p, t in in_scope),
        "stage2_on_target": sum(summary(p, t)["on_target"] for p, t in in_scope),
        "summaries": {f"{p}/{t}": summary(p, t) for p, t in in_scope},
        "primary": values,
    }
    (HERE / "expected.json").write_text(json.dumps(expected, indent=2, sort_keys=True) + "\n")
    print(table, end="")


if __name__ == "__main__":
    main()
