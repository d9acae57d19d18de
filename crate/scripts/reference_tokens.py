# SPDX-License-Identifier: MIT OR Apache-2.0
"""Writes reference GPT-2 token ids for the parity corpus.

Uses the pure-Python GPT2Tokenizer from `transformers` over the vendored
vocab.json / merges.txt. Run once; the output is checked in.

    python3 scripts/reference_tokens.py
"""
import json
from pathlib import Path

import transformers
from transformers import GPT2Tokenizer

ROOT = Path(__file__).resolve().parent.parent
CORE = ROOT / "crates" / "core"


def main():
    tok = GPT2Tokenizer.from_pretrained(str(CORE / "assets" / "gpt2"))
    assert len(tok) == 50257
    strings = json.loads((CORE / "data" / "parity_strings.json").read_text(encoding="utf-8"))
    cases = [{"text": s, "ids": tok.encode(s)} for s in strings]
    out = {
        "reference": f"transformers {transformers.__version__} GPT2Tokenizer",
        "cases": cases,
    }
    (CORE / "data" / "tokenizer_parity.json").write_text(
        json.dumps(out, ensure_ascii=False, indent=1) + "\n", encoding="utf-8"
    )
    print(f"wrote {len(cases)} cases")


if __name__ == "__main__":
    main()
