"""Token protocol shared with the scanner that consumes exported weights.

The scanner feeds bytecode to the model as byte values shifted past a
small reserved block, with id 0 used for padding.  Training has to
produce embeddings under the same mapping, so the constants are pinned
here; they are part of the weight-file contract, not free choices.
"""

PAD = 0
# ids 1..4 are reserved; training claims the last one as the mask token
MASK = 4
RESERVED = 5
VOCAB_SIZE = 261

# classifier labels, in the order the scanner reads head outputs
LABELS = ("S", "E", "N")
LABEL_IDS = {name: i for i, name in enumerate(LABELS)}

# desk-scale encoder geometry
HIDDEN = 64
LAYERS = 2
HEADS = 4
FFN = 256
MAX_SEQ = 512


def byte_token(b: int) -> int:
    return b + RESERVED


def header() -> dict:
    """Weight-file header for the desk-scale geometry."""
    return {
        "vocab_size": VOCAB_SIZE,
        "hidden_dim": HIDDEN,
        "layer_count": LAYERS,
        "head_count": HEADS,
        "ffn_dim": FFN,
        "max_seq_len": MAX_SEQ,
    }
