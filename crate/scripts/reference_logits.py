"""Final-position reference logits from transformers' GPT2LMHeadModel.

Loads a checkpoint written by `negascope synth-weights` (GPT-2 Small shape),
tokenizes each line of crates/core/data/prompts.txt with the reference
GPT-2 tokenizer and stores the last-row logits.

    negascope synth-weights --out /tmp/synth --seed 0
    python scripts/reference_logits.py /tmp/synth
"""

import hashlib
import json
import sys
from pathlib import Path

import torch
import transformers
from safetensors.torch import load_file, save_file
from transformers import GPT2Config, GPT2LMHeadModel, GPT2Tokenizer

ROOT = Path(__file__).resolve().parent.parent
CORE = ROOT / "crates" / "core"
DATA = CORE / "data"


def main(model_dir: Path) -> None:
    ckpt = model_dir / "model.safetensors"
    digest = hashlib.sha256(ckpt.read_bytes()).hexdigest()
    cfg = GPT2Config.from_json_file(model_dir / "config.json")
    model = GPT2LMHeadModel(cfg)
    model.config._attn_implementation = "eager"
    state = {f"transformer.{k}": v for k, v in load_file(ckpt).items()}
    missing, unexpected = model.load_state_dict(state, strict=False)
    missing = [m for m in missing if m != "lm_head.weight" and not m.endswith(".attn.bias")]
    assert not missing and not unexpected, (missing, unexpected)
    model.tie_weights()
    assert torch.equal(model.lm_head.weight, model.transformer.wte.weight)
    model.eval().float()

    tok = GPT2Tokenizer.from_pretrained(CORE / "assets" / "gpt2")
    prompts = (DATA / "prompts.txt").read_text(encoding="utf-8").splitlines()
    rows, ids, top = [], [], []
    with torch.no_grad():
        for p in prompts:
            t = tok.encode(p)
            logits = model(torch.tensor([t])).logits[0, -1]
            rows.append(logits)
            ids.append(t)
            top.append(int(logits.argmax()))
    save_file({"logits": torch.stack(rows).contiguous()}, DATA / "reference_logits.safetensors")
    meta = {
        "reference": f"transformers {transformers.__version__} GPT2LMHeadModel (eager attention, float32)",
        "checkpoint_sha256": digest,
        "synthetic_seed": 0,
        "prompts": [{"text": p, "ids": i, "top1": k} for p, i, k in zip(prompts, ids, top)],
    }
    (DATA / "reference_logits.json").write_text(json.dumps(meta, indent=1) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main(Path(sys.argv[1]))
