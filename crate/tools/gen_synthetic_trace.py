#!/usr/bin/env python3
"""Build the synthetic trace archive fixture and its companion values.

Writes a small trace archive straight from this script (a second,
independent implementation of the format) plus a JSON file with the
layer-to-final statistics and adaptability score computed here with scalar
float64 arithmetic. The Rust tests read the archive back and must reproduce
the companion numbers.

Archive layout (little-endian):
  magic b"EXLTRACE", version u32
  model_id: u32 len + bytes
  num_layers u32, d_model u32, vocab u32
  level u8 (2 = full), top_k u32, steps u64
  per step: step u64, chosen u32,
    per layer: d_model f32 hidden, vocab f32 logits,
               top_k u32 ids, top_k f32 values
"""

import hashlib
import json
import math
import pathlib
import struct

MODEL_ID = "synthetic-replay-v1"
L = 4
D_MODEL = 8
VOCAB = 32
TOP_K = 5
STEPS = 24
ALPHA = 0.5
SEED = "synthetic-trace-v1"


def stream(name, count):
    """f32 values in [-1, 1) from a counter-indexed SHA-256 stream."""
    out = []
    block = 0
    while len(out) < count:
        digest = hashlib.sha256(
            f"{SEED}/{name}/{block}".encode()).digest()
        for k in range(8):
            if len(out) == count:
                break
            word = struct.unpack_from("<I", digest, 4 * k)[0]
            v = -1.0 + 2.0 * (word / 2**32)
            out.append(struct.unpack("<f", struct.pack("<f", v))[0])
        block += 1
    return out


def top_k(logits, k):
    idx = sorted(range(len(logits)), key=lambda i: (-logits[i], i))[:k]
    return idx, [logits[i] for i in idx]


def cosine(u, v):
    dot = nu = nv = 0.0
    for a, b in zip(u, v):
        dot += a * b
        nu += a * a
        nv += b * b
    return max(-1.0, min(1.0, dot / math.sqrt(nu * nv)))


def build_steps():
    steps = []
    for s in range(STEPS):
        final_hidden = stream(f"step{s}/hidden/final", D_MODEL)
        final_logits = stream(f"step{s}/logits/final", VOCAB)
        layers = []
        for layer in range(1, L + 1):
            if layer == L:
                hidden, logits = final_hidden, final_logits
            else:
                # blend toward the final layer so deeper layers are closer
                noise_h = stream(f"step{s}/hidden/{layer}", D_MODEL)
                noise_l = stream(f"step{s}/logits/{layer}", VOCAB)
                w = layer / L
                hidden = [struct.unpack("<f", struct.pack(
                    "<f", w * f + (1 - w) * n))[0]
                    for f, n in zip(final_hidden, noise_h)]
                logits = [struct.unpack("<f", struct.pack(
                    "<f", w * f + (1 - w) * n))[0]
                    for f, n in zip(final_logits, noise_l)]
            ids, values = top_k(logits, TOP_K)
            layers.append((hidden, logits, ids, values))
        chosen = max(range(VOCAB), key=lambda i: (final_logits[i], -i))
        steps.append((s, chosen, layers))
    return steps


def write_archive(path, steps):
    buf = bytearray()
    buf += b"EXLTRACE"
    buf += struct.pack("<I", 1)
    buf += struct.pack("<I", len(MODEL_ID)) + MODEL_ID.encode()
    buf += struct.pack("<III", L, D_MODEL, VOCAB)
    buf += struct.pack("<B", 2)
    buf += struct.pack("<I", TOP_K)
    buf += struct.pack("<Q", len(steps))
    for s, chosen, layers in steps:
        buf += struct.pack("<QI", s, chosen)
        for hidden, logits, ids, values in layers:
            buf += struct.pack(f"<{D_MODEL}f", *hidden)
            buf += struct.pack(f"<{VOCAB}f", *logits)
            buf += struct.pack(f"<{TOP_K}I", *ids)
            buf += struct.pack(f"<{TOP_K}f", *values)
    path.write_bytes(bytes(buf))


def companion(steps):
    """Per-layer stats for the logit signal, plus the adaptability score."""
    layer_stats = []
    scores = []
    for layer in range(1, L):
        vals = []
        for _, _, layers in steps:
            vals.append(cosine(layers[layer - 1][1], layers[L - 1][1]))
        mean = sum(vals) / len(vals)
        var = sum((v - mean) ** 2 for v in vals) / len(vals)
        layer_stats.append({"layer": layer, "mean": mean,
                            "std": math.sqrt(var)})
        mapped = (mean + 1.0) / 2.0
        skip = (L - layer) / L
        scores.append(mapped ** ALPHA * skip ** (1 - ALPHA))
    eas = sum(scores) / (L - 1)
    return {
        "model_id": MODEL_ID,
        "num_layers": L,
        "signal": "output_logits",
        "alpha": ALPHA,
        "count": STEPS,
        "layers": layer_stats,
        "eas": eas,
    }


def main():
    fixtures = pathlib.Path(__file__).resolve().parent.parent / \
        "crates" / "exitlens" / "tests" / "fixtures"
    steps = build_steps()
    write_archive(fixtures / "synthetic_trace.trc", steps)
    comp = companion(steps)
    (fixtures / "synthetic_trace_expected.json").write_text(
        json.dumps(comp, indent=2) + "\n")
    print(f"wrote {fixtures / 'synthetic_trace.trc'} "
          f"({(fixtures / 'synthetic_trace.trc').stat().st_size} bytes)")
    print(f"companion eas = {comp['eas']!r}")
    for ls in comp["layers"]:
        print(f"  layer {ls['layer']}: mean={ls['mean']!r} std={ls['std']!r}")


if __name__ == "__main__":
    main()
