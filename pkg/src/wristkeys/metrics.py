"""Character error rate and CTC log-likelihood diagnostics.

All internal log arithmetic is in natural log; the language-model boundary
(log base 10) is converted explicitly where it occurs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .validation import check_logits


@dataclass(frozen=True)
class CerBreakdown:
    substitutions: int
    deletions: int
    insertions: int
    reference_length: int

    @property
    def total_edits(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def cer(self) -> float:
        """Percentage: 100 * (S + D + I) / reference length."""
        return 100.0 * self.total_edits / self.reference_length


def cer(reference, hypothesis) -> CerBreakdown:
    """Minimal-edit-distance CER with a substitution/deletion/insertion split.

    Reference and hypothesis are keystroke sequences (strings or symbol
    lists); backspace keystrokes count like any other symbol. Backtrace ties
    prefer substitution over insertion over deletion.
    """
    ref = list(reference)
    hyp = list(hypothesis)
    if len(ref) == 0:
        raise ValueError("undefined CER: empty reference")

    n, m = len(ref), len(hyp)
    d = np.zeros((n + 1, m + 1), dtype=np.int64)
    d[:, 0] = np.arange(n + 1)
    d[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            sub = d[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1])
            ins = d[i, j - 1] + 1
            dele = d[i - 1, j] + 1
            d[i, j] = min(sub, ins, dele)

    subs = ins = dels = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and d[i, j] == d[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]):
            subs += ref[i - 1] != hyp[j - 1]
            i, j = i - 1, j - 1
        elif j > 0 and d[i, j] == d[i, j - 1] + 1:
            ins += 1
            j -= 1
        else:
            dels += 1
            i -= 1
    return CerBreakdown(substitutions=int(subs), deletions=int(dels),
                        insertions=int(ins), reference_length=n)


def log_softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = logits - logits.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def ctc_loglik(logits: np.ndarray, target, blank_index: int) -> float:
    """log P(target | logits) under CTC via the forward algorithm in log space.

    `target` is a sequence of vocabulary indices (blank excluded). Logits are
    normalized internally per frame. Infeasible targets (longer than the
    frame count allows, counting the blanks forced between repeated labels)
    return -inf with a warning.
    """
    logits = check_logits(logits)
    logp = log_softmax(logits, axis=1)
    t_frames, vocab = logp.shape
    target = [int(c) for c in target]
    if any(c == blank_index or not 0 <= c < vocab for c in target):
        raise ValueError("target contains blank or out-of-vocabulary indices")

    u = len(target)
    min_frames = u + sum(1 for a, b in zip(target, target[1:]) if a == b)
    if min_frames > t_frames:
        warnings.warn(f"target needs at least {min_frames} frames, got {t_frames}; returning -inf")
        return float("-inf")

    # interleaved label sequence: blank, t1, blank, t2, ..., blank
    ext = [blank_index]
    for c in target:
        ext.extend([c, blank_index])
    s = len(ext)

    alpha = np.full(s, -np.inf)
    alpha[0] = logp[0, blank_index]
    if s > 1:
        alpha[1] = logp[0, ext[1]]
    for t in range(1, t_frames):
        prev = alpha
        alpha = np.full(s, -np.inf)
        for k in range(s):
            acc = prev[k]
            if k >= 1:
                acc = np.logaddexp(acc, prev[k - 1])
            if k >= 2 and ext[k] != blank_index and ext[k] != ext[k - 2]:
                acc = np.logaddexp(acc, prev[k - 2])
            alpha[k] = acc + logp[t, ext[k]]
    if s == 1:
        return float(alpha[0])
    return float(np.logaddexp(alpha[-1], alpha[-2]))
