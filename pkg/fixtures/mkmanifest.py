"""Regenerate db/manifest.tsv from the compiled exporter artifacts.

Each row names one library method to register.  Public methods locate by
dispatch selector; internal ones by the first byte offset of their body,
taken from the compiler's source-map ground truth.
"""

import json
from pathlib import Path

HERE = Path(__file__).parent

# (artifact, subcontract, version, qualified source name, visibility)
METHODS = [
    ("db_address.json", "Address", "1", "Address.CallWithValue", "internal"),
    ("db_erc20.json", "ERC20", "1", "ERC20.transfer", "public"),
    ("db_merkleproof.json", "MerkleProof", "1", "MerkleProof.validate", "internal"),
    ("db_metaswaputils.json", "MetaSwapUtils", "1", "MetaSwapUtils._xp", "internal"),
    ("db_ownable.json", "Ownable", "1", "Ownable.setOwner", "internal"),
    ("db_pricefeed_v1.json", "PriceFeedV1", "1", "PriceFeedV1._price", "internal"),
    ("db_pricefeed_v2.json", "PriceFeedV2", "2", "PriceFeedV2._price", "internal"),
    ("db_rewardmath_v1.json", "RewardMath", "1", "RewardMath._rate", "internal"),
    ("db_rewardmath_v2.json", "RewardMathV2", "2", "RewardMathV2._rate", "internal"),
    ("db_safetransfer.json", "SafeTransfer", "1", "SafeTransfer.Transfer", "internal"),
    ("db_swaputils.json", "SwapUtils", "1", "SwapUtils._xp", "internal"),
]


def locator_for(art, qualname, visibility):
    fn = next(f for f in art["functions"] if f["qualname"] == qualname)
    if visibility == "public":
        short = qualname.split(".", 1)[1]
        sel = next(v for k, v in art["selectors"].items() if k.startswith(short + "("))
        return f"selector:{sel}"
    start = min(run[0] for run in fn["runs"])
    return f"offset:{start}"


def main():
    rows = ["# file\tsubcontract\tversion\tmethod\tlocator\tvisibility"]
    for fname, sub, ver, qual, vis in METHODS:
        art = json.loads((HERE / "compiled" / fname).read_text())
        method = qual.split(".", 1)[1]
        loc = locator_for(art, qual, vis)
        rows.append(f"{fname}\t{sub}\t{ver}\t{method}\t{loc}\t{vis}")
    out = HERE / "db" / "manifest.tsv"
    out.parent.mkdir(exist_ok=True)
    out.write_text("\n".join(rows) + "\n")
    print(f"wrote {out} ({len(rows) - 1} rows)")


if __name__ == "__main__":
    main()
