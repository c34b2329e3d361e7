#!/usr/bin/env python3
"""Protocol double for the model bridge: small deterministic vectors and
solid-colour images. Text "FAIL" answers ok:false, "NOMODEL" answers
model_unavailable, text "CRASH" exits."""
import base64
import hashlib
import io
import json
import struct
import sys
import zlib

DIM = 8
LENGTH = 6


def f32(values):
    return base64.b64encode(struct.pack("<%df" % len(values), *values)).decode()


def unf32(text):
    raw = base64.b64decode(text)
    return list(struct.unpack("<%df" % (len(raw) // 4), raw))


def vec(text, n=DIM):
    h = hashlib.sha256(text.encode()).digest()
    return [(h[i % len(h)] - 127.5) / 64.0 for i in range(n)]


def png(width, height, rgb):
    row = b"\x00" + bytes(rgb) * width
    raw = row * height
    def chunk(kind, data):
        c = struct.pack(">I", len(data)) + kind + data
        return c + struct.pack(">I", zlib.crc32(kind + data) & 0xFFFFFFFF)
    body = chunk(b"IHDR", struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0))
    body += chunk(b"IDAT", zlib.compress(raw)) + chunk(b"IEND", b"")
    return base64.b64encode(b"\x89PNG\r\n\x1a\n" + body).decode()


def colour(key):
    h = hashlib.sha256(key.encode()).digest()
    return h[0], h[1], h[2]


def handle(req):
    op = req["op"]
    if op == "clip_info":
        return {"model_id": "fake-clip:" + req["model"], "dim": DIM, "context_length": LENGTH}
    if op == "count_tokens":
        return {"count": len(req["text"].split())}
    if op == "encode_text":
        text = req["text"]
        if text == "FAIL":
            raise ValueError("refusing text")
        if text == "NOMODEL":
            raise LookupError("weights not found")
        if text == "CRASH":
            sys.exit(3)
        words = text.split()[: LENGTH - 2]
        tokens = ["<s>"] + words + ["</s>"]
        rows = []
        for i in range(LENGTH):
            rows += vec(tokens[min(i, len(tokens) - 1)] + "#" + str(i))
        mask = [1 if i < len(tokens) else 0 for i in range(LENGTH)]
        return {"pooled": f32(vec(text)), "sequence": f32(rows), "length": LENGTH, "dim": DIM,
                "attention_mask": mask, "tokens": tokens, "truncated": len(text.split()) > LENGTH - 2}
    if op == "encode_image":
        return {"vector": f32(vec(req["png"]))}
    if op == "sd_info":
        return {"model_id": "fake-sd:" + req["model"], "latent_factor": 8, "length": LENGTH, "dim": DIM}
    if op == "sequence_length":
        return {"length": min(len(req["prompt"].split()) + 2, LENGTH)}
    if op == "txt2img":
        p = req["params"]
        return {"png": png(p["width"], p["height"], colour(p["prompt"] + str(p["seed"])))}
    if op == "from_conditioning":
        p = req["params"]
        rows = unf32(req["conditioning"])
        if len(rows) != req["length"] * req["dim"]:
            raise ValueError("conditioning size")
        return {"png": png(p["width"], p["height"], colour(req["conditioning"] + str(p["seed"])))}
    if op == "prompt_to_prompt":
        p = req["params"]
        ca = req["cross_attention"]
        return {"png": png(p["width"], p["height"], colour(ca["editorial_prompt"] + json.dumps(ca["token_weights"])))}
    if op == "inception_info":
        return {"model_id": "fake-inception", "dim": 4, "input_size": 16}
    if op == "inception_features":
        return {"vector": f32(vec(req["png"], 4))}
    raise ValueError("unknown op " + op)


def main():
    for line in sys.stdin:
        try:
            reply = handle(json.loads(line))
            reply["ok"] = True
        except SystemExit:
            raise
        except LookupError as e:
            reply = {"ok": False, "error": str(e), "code": "model_unavailable"}
        except Exception as e:
            reply = {"ok": False, "error": str(e)}
        sys.stdout.write(json.dumps(reply) + "\n")
        sys.stdout.flush()


if __name__ == "__main__":
    main()
