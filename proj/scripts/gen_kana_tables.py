#!/usr/bin/env python3
"""Regenerates the shipped hiragana transliteration tables.

en.kana.tsv follows modified Hepburn; el.kana.tsv re-spells the Hepburn
output in Greek letters. Run from the repository root.
"""

from pathlib import Path

BASIC = """
あ a い i う u え e お o
か ka き ki く ku け ke こ ko
さ sa し shi す su せ se そ so
た ta ち chi つ tsu て te と to
な na に ni ぬ nu ね ne の no
は ha ひ hi ふ fu へ he ほ ho
ま ma み mi む mu め me も mo
や ya ゆ yu よ yo
ら ra り ri る ru れ re ろ ro
わ wa ゐ i ゑ e を o
ん n
が ga ぎ gi ぐ gu げ ge ご go
ざ za じ ji ず zu ぜ ze ぞ zo
だ da ぢ ji づ zu で de ど do
ば ba び bi ぶ bu べ be ぼ bo
ぱ pa ぴ pi ぷ pu ぺ pe ぽ po
ゔ vu
ぁ a ぃ i ぅ u ぇ e ぉ o ゎ wa
ゃ ya ゅ yu ょ yo
"""

DIGRAPH_BASES = {
    "き": "ky", "ぎ": "gy", "し": "sh", "じ": "j", "ち": "ch", "ぢ": "j",
    "に": "ny", "ひ": "hy", "び": "by", "ぴ": "py", "み": "my", "り": "ry",
}
SMALL_Y = {"ゃ": "a", "ゅ": "u", "ょ": "o"}

PUNCT = {"。": ".", "、": ",", "？": "?", "！": "!", "「": "\"", "」": "\"",
         "ー": "-", "・": " ", "っ": "t"}


def hepburn_table():
    table = {}
    tokens = BASIC.split()
    for kana, roma in zip(tokens[::2], tokens[1::2]):
        table[kana] = roma
    for base, stem in DIGRAPH_BASES.items():
        for small, vowel in SMALL_Y.items():
            table[base + small] = stem + vowel
    # Sokuon doubles the next consonant; before "ch" it is written "t".
    geminable = {k: v for k, v in table.items()
                 if v[0] not in "aiueon" and k not in "ぁぃぅぇぉゃゅょゎ"}
    for kana, roma in geminable.items():
        table["っ" + kana] = ("t" + roma) if roma.startswith("ch") else (roma[0] + roma)
    table.update(PUNCT)
    return table


GREEK = [("sh", "σ"), ("ch", "τσ"), ("ts", "τσ"), ("a", "α"), ("i", "ι"), ("u", "ου"),
         ("e", "ε"), ("o", "ο"), ("k", "κ"), ("s", "σ"), ("t", "τ"), ("n", "ν"),
         ("h", "χ"), ("f", "φ"), ("m", "μ"), ("y", "γ"), ("r", "ρ"), ("w", "β"),
         ("g", "γ"), ("j", "τζ"), ("z", "ζ"), ("d", "ντ"), ("b", "μπ"), ("p", "π"),
         ("v", "β")]


def to_greek(roma):
    out, i = [], 0
    while i < len(roma):
        for latin, greek in GREEK:
            if roma.startswith(latin, i):
                out.append(greek)
                i += len(latin)
                break
        else:
            out.append(roma[i])
            i += 1
    return "".join(out)


def write(path, table):
    with open(path, "w", encoding="utf-8") as f:
        f.write("# symbol\trendering\n")
        for kana in sorted(table):
            f.write(f"{kana}\t{table[kana]}\n")


def main():
    lang = Path("data/lang")
    table = hepburn_table()
    write(lang / "en.kana.tsv", table)
    write(lang / "el.kana.tsv", {k: to_greek(v) for k, v in table.items()})


if __name__ == "__main__":
    main()
