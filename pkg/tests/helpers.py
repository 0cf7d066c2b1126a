"""Shared test oracles and fixture builders, independent of the code they check."""

from __future__ import annotations

import itertools

import numpy as np

import wristkeys as wk
from wristkeys.decode import DEFAULT_BLANK_INDEX, DEFAULT_CHARSET


def ctc_collapse(path, blank):
    """Collapse one frame-level path: merge repeats, drop blanks."""
    out = []
    prev = -1
    for idx in path:
        if idx != prev and idx != blank:
            out.append(idx)
        prev = idx
    return tuple(out)


def enumerate_ctc(logp, blank):
    """Exact CTC marginals by brute force: prob of every collapsed sequence."""
    t_frames, vocab = logp.shape
    probs = {}
    for path in itertools.product(range(vocab), repeat=t_frames):
        seq = ctc_collapse(path, blank)
        p = float(np.exp(sum(logp[t, i] for t, i in enumerate(path))))
        probs[seq] = probs.get(seq, 0.0) + p
    return probs


def best_prefix_by_enumeration(logp, blank, symbols):
    probs = enumerate_ctc(logp, blank)
    ranked = sorted(
        probs.items(), key=lambda kv: (-kv[1], "".join(symbols[i] for i in kv[0]))
    )
    seq, p = ranked[0]
    return "".join(symbols[i] for i in seq), p


def levenshtein(a, b):
    """Distance-only edit distance, kept deliberately naive."""
    a, b = list(a), list(b)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


TINY_LM_TEXT = """\\data\\
ngram 1=5
ngram 2=3

\\1-grams:
-0.60206\ta\t-0.30103
-0.60206\tb\t-0.30103
-1.0\t<s>\t-0.30103
-1.0\t</s>
-1.0\t<bs>

\\2-grams:
-0.30103\ta b
-0.52\t<s> a
-0.9\tb </s>

\\end\\
"""


def write_tiny_lm(path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(TINY_LM_TEXT)
    return path


def rig_head_for_session(session, config, weights, rtn_config=None, margin=10.0):
    """Fit the final linear head so greedy decoding reproduces the session labels.

    The encoder stays as given; only head.weight / head.bias are replaced by
    a ridge least-squares fit from the pre-head embeddings to per-frame
    targets (label class around each keystroke, blank elsewhere).
    """
    feats = wk.extract_features(session.emg.astype(np.float64),
                                reduce_bands=config.n_freqs == 6)
    norm = wk.rtn_batch(feats, rtn_config or wk.RtnConfig())
    pre_head = wk.encode(norm, config, weights).pre_head
    t_frames = pre_head.shape[0]

    sym_to_idx = {s: i for i, s in enumerate(DEFAULT_CHARSET[:-1])}
    targets = np.zeros((t_frames, config.vocab_size))
    targets[:, DEFAULT_BLANK_INDEX] = 1.0
    for ts, sym in session.labels:
        f = ts // 16
        lo, hi = max(0, f - 2), min(t_frames, f + 3)
        targets[lo:hi] = 0.0
        targets[lo:hi, sym_to_idx[sym]] = 1.0

    a = np.concatenate([pre_head, np.ones((t_frames, 1))], axis=1)
    solution = np.linalg.solve(
        a.T @ a + 1e-3 * np.eye(a.shape[1]), a.T @ (margin * targets)
    )
    rigged = wk.WeightStore(dict(weights.tensors))
    rigged.tensors["head.weight"] = solution[:-1].astype(np.float32)
    rigged.tensors["head.bias"] = solution[-1].astype(np.float32)
    return rigged
