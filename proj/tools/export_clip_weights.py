#!/usr/bin/env python3
"""Convert a ViT-B/16 vision-language checkpoint into the plain state dict
the pretrained backend loads.

Accepts the original TorchScript archive (ViT-B-16.pt) or a pickled state
dict with the same key names. Writes <cache>/ViT-B-16/state_dict.pt and,
when --bpe is given, copies the BPE merges file next to it.
"""

import argparse
import os
import shutil
from pathlib import Path

import torch

DROP = {"input_resolution", "context_length", "vocab_size"}


def load(path):
    try:
        return torch.jit.load(path, map_location="cpu").state_dict()
    except RuntimeError:
        state = torch.load(path, map_location="cpu")
        return state.get("state_dict", state)


def main():
    default_cache = os.environ.get("INDIVAID_CACHE", str(Path.home() / ".cache" / "indivaid"))
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("checkpoint")
    p.add_argument("--bpe", help="bpe_simple_vocab_16e6.txt.gz")
    p.add_argument("--cache", default=default_cache)
    args = p.parse_args()

    state = {k: v.detach().float().contiguous() for k, v in load(args.checkpoint).items() if k not in DROP}
    out = Path(args.cache) / "ViT-B-16"
    out.mkdir(parents=True, exist_ok=True)
    torch.save(state, out / "state_dict.pt")
    print(f"wrote {len(state)} tensors to {out / 'state_dict.pt'}")
    if args.bpe:
        shutil.copy(args.bpe, Path(args.cache) / "bpe_simple_vocab_16e6.txt.gz")


if __name__ == "__main__":
    main()
