"""Assemble the bundled fixture corpus from its .wat sources.

Writes src/wasm_shade/corpus/wasm/*.wasm, the manifest, and an unrolled
variant of the xor/rotate hash under tests/data. Needs wasmtime:

    pip install wasmtime && python3 scripts/build_corpus.py
"""

import json
import re
from pathlib import Path

import wasmtime

from wasm_shade.wasm import encode_module, parse_module, validate

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "src" / "wasm_shade" / "corpus"
TESTDATA = ROOT / "tests" / "data"

MINER_SUITE = [["hash", [0]], ["hash", [1]], ["hash", [12345]], ["hash", [-1]]]

BENIGN = {
    "add": [["add", [2, 3]], ["add", [-1, 1]], ["add", [2147483647, 1]]],
    "arith_utils": [["gcd", [48, 18]], ["gcd", [0, 7]], ["lcm", [4, 6]], ["clamp", [5, 0, 3]],
                    ["clamp", [-2, 0, 3]], ["ipow", [3, 5]], ["isqrt", [99]]],
    "factorial_fib": [["fib", [10]], ["fact", [15]], ["collatz", [27]]],
    "string_routines": [["strlen", [16]], ["to_upper", [16]], ["reverse", [128]],
                        ["count_char", [64, 111]], ["reverse", [64]], ["strlen", [64]]],
    "memcopy": [["memcpy", [512, 256, 40]], ["memcmp", [512, 256, 40]],
                ["memset", [600, 65, 16]], ["memcmp", [600, 256, 16]]],
    "bubble_sort": [["sort_and_sum", [10]], ["checksum", [0, 10]]],
    "game_of_life": [["step", []], ["step", []], ["step", []]],
    "game_physics": [["run", [5]], ["run", [3]]],
    "matrix": [["trace_of_product", [1.5]], ["trace_of_product", [-0.25]]],
    "prime_sieve": [["count_primes", [200]], ["count_primes", [50]]],
    "dispatch_game": [["play", [12]], ["play", [7]]],
    "text_stats": [["words", []], ["vowels", []], ["lines", []]],
}
MINERS = ["xor_rotate_hash", "cn_lite", "sha_like", "blake_like", "keccak_like", "murmur_mix"]


def assemble(text):
    m = parse_module(bytes(wasmtime.wat2wasm(text)))
    m = m.replace(customs=tuple(c for c in m.customs if c.name != "name"))
    validate(m).raise_if_invalid()
    return encode_module(m)


def unrolled_xor_rotate():
    """The xor/rotate hash with its 32-round loop expanded into straight-line code."""
    src = (CORPUS / "wat" / "xor_rotate_hash.wat").read_text()
    body = re.search(r"\(loop \$round\n(.*?)\n\s*\(local.set \$i", src, re.S).group(1)
    rounds = "\n".join(body.replace("(local.get $i)", f"(i32.const {i})") for i in range(32))
    return re.sub(r"\(loop \$round\n.*?\(i32.const 32\)\)\)\)", rounds, src, flags=re.S)


def main():
    out = CORPUS / "wasm"
    out.mkdir(exist_ok=True)
    entries = []
    for label, names in (("benign", list(BENIGN)), ("miner", MINERS)):
        for name in names:
            data = assemble((CORPUS / "wat" / f"{name}.wat").read_text())
            (out / f"{name}.wasm").write_bytes(data)
            entry = {"name": name, "path": f"wasm/{name}.wasm", "label": label,
                     "suite": BENIGN.get(name, MINER_SUITE)}
            if label == "miner":
                entry["hash_export"] = "hash"
            entries.append(entry)
    (CORPUS / "manifest.json").write_text(json.dumps(entries, indent=1) + "\n")
    TESTDATA.mkdir(parents=True, exist_ok=True)
    (TESTDATA / "xor_rotate_unrolled.wasm").write_bytes(assemble(unrolled_xor_rotate()))
    print(f"wrote {len(entries)} fixtures")


if __name__ == "__main__":
    main()
