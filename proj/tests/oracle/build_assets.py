#!/usr/bin/env python3
"""Train the small byte-level BPE asset pair used by the test suites.

The output uses the published vocab.json / merges.txt layout with the
<s>, <pad>, </s>, <unk> specials at ids 0..3. Run once; outputs are
committed under tests/data/bpe/.
"""
import glob
import os
import sys

from tokenizers import ByteLevelBPETokenizer

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "..", "data", "bpe")

EXTRA = [
    "Café owners in Zürich say the naïve rumour was déjà vu.",
    "Les journalistes ont confirmé que l'article était faux.",
    "El gobierno niega que el informe sea verdadero.",
    "Die Regierung bestätigt den Bericht über die Übernahme.",
    "東京の新聞は主張を否定した。",
    "Новости сообщают, что заявление ложно.",
    "The suspect's lawyer said they'll appeal; we're told it's 100% false.",
    "🙂 🚀 👍 emoji-heavy headlines spread 10x faster 🔥🔥",
]


def corpus():
    for path in sorted(glob.glob("/usr/share/common-licenses/*")):
        if os.path.isfile(path):
            with open(path, encoding="utf-8", errors="replace") as fh:
                yield from fh
    for _ in range(50):
        yield from EXTRA


def main() -> int:
    os.makedirs(OUT, exist_ok=True)
    tok = ByteLevelBPETokenizer()
    tok.train_from_iterator(
        corpus(),
        vocab_size=3000,
        min_frequency=2,
        special_tokens=["<s>", "<pad>", "</s>", "<unk>", "<mask>"],
        show_progress=False,
    )
    tok.save_model(OUT)
    print("wrote", os.listdir(OUT))
    return 0


if __name__ == "__main__":
    sys.exit(main())
