#!/usr/bin/env python3
# Copyright 2026 The resprobe Authors
# SPDX-License-Identifier: Apache-2.0
"""Reference forward pass in float64 numpy, independent of the C++ engine.

Two commands:

  make-model  write a randomly initialized RPW1 file for one of the three
              architecture families (olmo, qwen2, gpt2)
  fixture     run every prompt through the reference forward and emit the
              fixture JSON consumed by `resprobe check-fixture`

`fixture --transpose NAME` swaps the two axes of a square projection before
running, producing a fixture the engine must reject.
"""

import argparse
import json
import struct
import sys

import numpy as np

EPS = 1e-5

ARCHS = {
    "olmo": dict(norm_kind="nonparametric_layernorm", positional_kind="rotary", mlp_kind="swiglu",
                 weight_tying=True, attn_bias=False, proj_bias=False, n_heads=4, n_kv_heads=4),
    "qwen2": dict(norm_kind="rmsnorm", positional_kind="rotary", mlp_kind="swiglu",
                  weight_tying=False, attn_bias=True, proj_bias=False, n_heads=4, n_kv_heads=2),
    "gpt2": dict(norm_kind="layernorm", positional_kind="learned", mlp_kind="gelu",
                 weight_tying=True, attn_bias=True, proj_bias=True, n_heads=4, n_kv_heads=4),
}


def read_rpw(path):
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != b"RPW1":
        raise SystemExit(f"{path}: bad magic")
    (hlen,) = struct.unpack("<Q", blob[4:12])
    header = json.loads(blob[12:12 + hlen].decode("utf-8"))
    base = 12 + hlen
    tensors = {}
    for name, entry in header["tensors"].items():
        shape = entry["shape"]
        count = int(np.prod(shape))
        start = base + entry["offset"]
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=start)
        tensors[name] = arr.reshape(shape).astype(np.float64)
    return header["config"], tensors


def write_rpw(path, config, tensors, metadata=None):
    names = sorted(tensors)
    directory = {}
    offset = 0
    for name in names:
        t = np.ascontiguousarray(tensors[name], dtype="<f4")
        directory[name] = {"shape": list(t.shape), "offset": offset}
        offset += t.nbytes
    header = {"format": "RPW1", "config": config, "tensors": directory, "metadata": metadata or {}}
    text = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(b"RPW1")
        f.write(struct.pack("<Q", len(text)))
        f.write(text)
        for name in names:
            f.write(np.ascontiguousarray(tensors[name], dtype="<f4").tobytes())


def make_model(arch, seed, vocab, hidden, layers, inter, max_seq):
    spec = ARCHS[arch]
    config = {
        "hidden_size": hidden, "n_layers": layers, "n_heads": spec["n_heads"],
        "n_kv_heads": spec["n_kv_heads"], "intermediate_size": inter, "vocab_size": vocab,
        "norm_kind": spec["norm_kind"], "weight_tying": spec["weight_tying"], "max_seq_len": max_seq,
        "positional_kind": spec["positional_kind"], "mlp_kind": spec["mlp_kind"],
        "attn_bias": spec["attn_bias"], "proj_bias": spec["proj_bias"], "rope_theta": 10000.0,
    }
    rng = np.random.default_rng(seed)
    kv = hidden // spec["n_heads"] * spec["n_kv_heads"]
    t = {}

    def mat(name, rows, cols, std):
        t[name] = rng.normal(0.0, std, size=(rows, cols))

    def vec(name, n, mean, std):
        t[name] = mean + rng.normal(0.0, std, size=(n,))

    def norm(prefix):
        if spec["norm_kind"] != "nonparametric_layernorm":
            vec(prefix + ".weight", hidden, 1.0, 0.1)
        if spec["norm_kind"] == "layernorm":
            vec(prefix + ".bias", hidden, 0.0, 0.1)

    def linear(name, fan_in, fan_out, bias):
        mat(name + ".weight", fan_in, fan_out, 1.0 / np.sqrt(fan_in))
        if bias:
            vec(name + ".bias", fan_out, 0.0, 0.1)

    mat("embed.weight", vocab, hidden, 1.0)
    if spec["positional_kind"] == "learned":
        mat("pos_embed.weight", max_seq, hidden, 0.3)
    for l in range(layers):
        p = f"layers.{l}."
        norm(p + "attn_norm")
        linear(p + "attn.q", hidden, hidden, spec["attn_bias"])
        linear(p + "attn.k", hidden, kv, spec["attn_bias"])
        linear(p + "attn.v", hidden, kv, spec["attn_bias"])
        linear(p + "attn.o", hidden, hidden, spec["proj_bias"])
        norm(p + "mlp_norm")
        if spec["mlp_kind"] == "swiglu":
            linear(p + "mlp.gate", hidden, inter, spec["proj_bias"])
        linear(p + "mlp.up", hidden, inter, spec["proj_bias"])
        linear(p + "mlp.down", inter, hidden, spec["proj_bias"])
    norm("final_norm")
    if not spec["weight_tying"]:
        mat("lm_head.weight", vocab, hidden, 1.0 / np.sqrt(hidden))
    return config, t


def apply_norm(cfg, w, prefix, x):
    kind = cfg["norm_kind"]
    if kind == "rmsnorm":
        ms = np.mean(x * x, axis=-1, keepdims=True)
        return x / np.sqrt(ms + EPS) * w[prefix + ".weight"]
    mu = np.mean(x, axis=-1, keepdims=True)
    var = np.mean((x - mu) ** 2, axis=-1, keepdims=True)
    y = (x - mu) / np.sqrt(var + EPS)
    if kind == "layernorm":
        y = y * w[prefix + ".weight"] + w[prefix + ".bias"]
    return y


def linear(w, name, x, bias):
    y = x @ w[name + ".weight"]
    if bias:
        y = y + w[name + ".bias"]
    return y


def rotary(x, n_heads, theta):
    seq, width = x.shape
    hd = width // n_heads
    half = hd // 2
    inv = theta ** (-2.0 * np.arange(half) / hd)
    ang = np.arange(seq)[:, None] * inv[None, :]
    cos, sin = np.cos(ang), np.sin(ang)
    x = x.reshape(seq, n_heads, hd)
    x1, x2 = x[..., :half], x[..., half:]
    out = np.concatenate([x1 * cos[:, None, :] - x2 * sin[:, None, :],
                          x1 * sin[:, None, :] + x2 * cos[:, None, :]], axis=-1)
    return out.reshape(seq, width)


def gelu_tanh(x):
    return 0.5 * x * (1.0 + np.tanh(np.sqrt(2.0 / np.pi) * (x + 0.044715 * x ** 3)))


def forward(cfg, w, ids):
    d = cfg["hidden_size"]
    nh, nkv = cfg["n_heads"], cfg["n_kv_heads"]
    hd = d // nh
    seq = len(ids)
    x = w["embed.weight"][ids]
    if cfg["positional_kind"] == "learned":
        x = x + w["pos_embed.weight"][:seq]
    mask = np.triu(np.full((seq, seq), -np.inf), k=1)
    for l in range(cfg["n_layers"]):
        p = f"layers.{l}."
        h = apply_norm(cfg, w, p + "attn_norm", x)
        q = linear(w, p + "attn.q", h, cfg["attn_bias"])
        k = linear(w, p + "attn.k", h, cfg["attn_bias"])
        v = linear(w, p + "attn.v", h, cfg["attn_bias"])
        if cfg["positional_kind"] == "rotary":
            q = rotary(q, nh, cfg["rope_theta"])
            k = rotary(k, nkv, cfg["rope_theta"])
        out = np.zeros((seq, d))
        for head in range(nh):
            kvh = head // (nh // nkv)
            qh = q[:, head * hd:(head + 1) * hd]
            kh = k[:, kvh * hd:(kvh + 1) * hd]
            vh = v[:, kvh * hd:(kvh + 1) * hd]
            s = qh @ kh.T / np.sqrt(hd) + mask
            s = np.exp(s - s.max(axis=-1, keepdims=True))
            s /= s.sum(axis=-1, keepdims=True)
            out[:, head * hd:(head + 1) * hd] = s @ vh
        x = x + linear(w, p + "attn.o", out, cfg["proj_bias"])
        h = apply_norm(cfg, w, p + "mlp_norm", x)
        up = linear(w, p + "mlp.up", h, cfg["proj_bias"])
        if cfg["mlp_kind"] == "swiglu":
            g = linear(w, p + "mlp.gate", h, cfg["proj_bias"])
            act = g / (1.0 + np.exp(-g)) * up
        else:
            act = gelu_tanh(up)
        x = x + linear(w, p + "mlp.down", act, cfg["proj_bias"])
    last = x[-1]
    h = apply_norm(cfg, w, "final_norm", last[None, :])[0]
    unemb = w["embed.weight"] if cfg["weight_tying"] else w["lm_head.weight"]
    return last, unemb @ h


def cmd_make_model(args):
    config, tensors = make_model(args.arch, args.seed, args.vocab, args.hidden, args.layers,
                                 args.intermediate, args.max_seq)
    write_rpw(args.out, config, tensors, {"source": "reference_forward.py", "arch": args.arch})


def cmd_fixture(args):
    cfg, w = read_rpw(args.weights)
    if args.transpose:
        m = w[args.transpose]
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise SystemExit(f"{args.transpose} is not a square matrix")
        w[args.transpose] = m.T.copy()
    rng = np.random.default_rng(args.seed)
    entries = []
    for i in range(args.prompts):
        n = int(rng.integers(3, min(13, cfg["max_seq_len"]) + 1))
        ids = [int(v) for v in rng.integers(0, cfg["vocab_size"], size=n)]
        _, logits = forward(cfg, w, ids)
        k = min(100, len(logits))
        order = np.argsort(-logits, kind="stable")[:k]
        entries.append({
            "label": f"{'AB'[i % 2]}{i // 2 + 1}",
            "ids": ids,
            "top100": [[int(j), float(logits[j])] for j in order],
            "top_prediction": int(np.argmax(logits)),
        })
    with open(args.out, "w") as f:
        json.dump({"source": "reference_forward.py", "prompts": entries}, f, indent=1)


def main(argv):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    mk = sub.add_parser("make-model")
    mk.add_argument("--arch", choices=sorted(ARCHS), required=True)
    mk.add_argument("--seed", type=int, default=0)
    mk.add_argument("--vocab", type=int, default=50)
    mk.add_argument("--hidden", type=int, default=32)
    mk.add_argument("--layers", type=int, default=2)
    mk.add_argument("--intermediate", type=int, default=48)
    mk.add_argument("--max-seq", type=int, default=16)
    mk.add_argument("--out", required=True)
    fx = sub.add_parser("fixture")
    fx.add_argument("--weights", required=True)
    fx.add_argument("--out", required=True)
    fx.add_argument("--seed", type=int, default=0)
    fx.add_argument("--prompts", type=int, default=12)
    fx.add_argument("--transpose")
    args = ap.parse_args(argv)
    {"make-model": cmd_make_model, "fixture": cmd_fixture}[args.cmd](args)


if __name__ == "__main__":
    main(sys.argv[1:])
