#!/usr/bin/env python3
#
# Copyright 2026 The PCM Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
#

"""Exports a Hugging Face BERT checkpoint as a pcm encoder directory.

Writes config.json, vocab.txt and weights.pcmt (see pcm/tensor_io.h).
Linear weights are transposed to the [in, out] layout the encoder uses.

  python3 tools/export_hf_encoder.py bert-base-uncased ~/.cache/pcm/bert-base-uncased
"""

import argparse
import json
import pathlib
import struct

import numpy as np
from transformers import BertModel, BertTokenizer


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("model", help="Hugging Face model id or local directory")
    parser.add_argument("out", type=pathlib.Path, help="Output encoder directory")
    args = parser.parse_args()

    model = BertModel.from_pretrained(args.model, add_pooling_layer=False)
    tokenizer = BertTokenizer.from_pretrained(args.model)
    cfg = model.config
    args.out.mkdir(parents=True, exist_ok=True)

    config = {
        "vocab_size": cfg.vocab_size,
        "hidden": cfg.hidden_size,
        "num_layers": cfg.num_hidden_layers,
        "num_heads": cfg.num_attention_heads,
        "intermediate": cfg.intermediate_size,
        "max_positions": cfg.max_position_embeddings,
        "type_vocab": cfg.type_vocab_size,
        "layer_norm_eps": cfg.layer_norm_eps,
        "dropout": cfg.hidden_dropout_prob,
        "init_std": cfg.initializer_range,
    }
    (args.out / "config.json").write_text(json.dumps(config, indent=2) + "\n")

    vocab = sorted(tokenizer.vocab.items(), key=lambda item: item[1])
    (args.out / "vocab.txt").write_text("".join(token + "\n" for token, _ in vocab))

    tensors = []
    for name, value in model.state_dict().items():
        if name.endswith("position_ids") or name.endswith("token_type_ids"):
            continue
        array = value.detach().cpu().numpy().astype("<f8")
        if array.ndim == 1:
            array = array.reshape(1, -1)
        elif not name.startswith("embeddings."):
            array = array.T
        tensors.append((name, np.ascontiguousarray(array)))

    header = {"meta": {"kind": "encoder", "source": args.model}, "tensors": []}
    offset = 0
    for name, array in tensors:
        header["tensors"].append({"name": name, "rows": array.shape[0], "cols": array.shape[1], "offset": offset})
        offset += array.size
    text = json.dumps(header).encode()
    with open(args.out / "weights.pcmt", "wb") as out:
        out.write(b"PCMTNSR1")
        out.write(struct.pack("<Q", len(text)))
        out.write(text)
        for _, array in tensors:
            out.write(array.tobytes())


if __name__ == "__main__":
    main()
