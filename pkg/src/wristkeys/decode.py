"""CTC decoding: greedy collapse and backspace-aware prefix beam search with a character LM.

The beam search keeps blank/non-blank scores per label prefix. Extending a
hypothesis with a regular character pushes that character's language-model
contribution onto a retraction stack; extending with the backspace keystroke
pops the stack (cancelling the retracted character's LM mass) and rolls the
LM context back one character, while the backspace itself stays in the
output prefix: it is a keystroke, not an edit of the decoded text.

CTC scores are kept in natural log; the n-gram file format is log base 10
and is converted exactly once, when a contribution enters the stack.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .metrics import log_softmax
from .validation import check_logits

LN10 = math.log(10.0)
BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

# Symbol spelling used in LM files for characters that would collide with the
# whitespace-separated format.
_ESCAPES = {" ": "<sp>", "\b": "<bs>", "\n": "<nl>", "\t": "<tab>", "\x7f": "<del>"}
_UNESCAPES = {v: k for k, v in _ESCAPES.items()}

BACKSPACE = "\b"

# 95 printable ASCII characters plus backspace/newline/tab/delete keystrokes
# gives 99 key classes; the CTC blank takes the last slot.
KEY_SYMBOLS: tuple[str, ...] = tuple(chr(c) for c in range(32, 127)) + ("\b", "\n", "\t", "\x7f")
DEFAULT_CHARSET: tuple[str, ...] = KEY_SYMBOLS + ("",)
DEFAULT_BLANK_INDEX = len(KEY_SYMBOLS)


def escape_symbol(sym: str) -> str:
    return _ESCAPES.get(sym, sym)


def unescape_symbol(token: str) -> str:
    return _UNESCAPES.get(token, token)


@dataclass(frozen=True)
class DecodeConfig:
    beam_size: int = 50
    lm_weight: float = 1.5
    insertion_bonus: float = 0.5
    blank_index: int = DEFAULT_BLANK_INDEX
    backspace_symbol: str = BACKSPACE

    def __post_init__(self):
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")


class CharLm:
    """Back-off n-gram model over character symbols, probabilities in log10."""

    def __init__(self, ngrams: dict[int, dict[tuple[str, ...], tuple[float, float | None]]]):
        if not ngrams or 1 not in ngrams:
            raise ValueError("language model needs at least a unigram section")
        self.order = max(ngrams)
        self.ngrams = ngrams
        self.vocabulary = frozenset(key[0] for key in ngrams[1])

    def counts(self) -> dict[int, int]:
        return {k: len(v) for k, v in sorted(self.ngrams.items())}


def lm_score(lm: CharLm, context, next_symbol: str) -> float:
    """log10 P(next | context) with standard back-off weight accumulation."""
    if next_symbol not in lm.vocabulary:
        if UNK in lm.vocabulary:
            next_symbol = UNK
        else:
            raise ValueError(f"unscorable symbol {next_symbol!r}: not in LM vocabulary and no {UNK} class")
    ctx = tuple(s if s in lm.vocabulary else UNK for s in context)
    ctx = ctx[-(lm.order - 1):] if lm.order > 1 else ()

    score = 0.0
    while True:
        entry = lm.ngrams.get(len(ctx) + 1, {}).get(ctx + (next_symbol,))
        if entry is not None:
            return score + entry[0]
        if not ctx:
            raise ValueError(f"unscorable symbol {next_symbol!r}: missing unigram entry")
        ctx_entry = lm.ngrams.get(len(ctx), {}).get(ctx)
        if ctx_entry is not None and ctx_entry[1] is not None:
            score += ctx_entry[1]
        ctx = ctx[1:]


def load_charlm(path, validate: bool = True) -> CharLm:
    """Parse a text n-gram file: \\data\\ count header, \\k-grams: sections, \\end\\."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()

    declared: dict[int, int] = {}
    ngrams: dict[int, dict[tuple[str, ...], tuple[float, float | None]]] = {}
    section: int | None = None
    in_header = False
    saw_end = False
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line == "\\data\\":
            in_header = True
            continue
        if line == "\\end\\":
            saw_end = True
            break
        if line.startswith("\\") and line.endswith("-grams:"):
            try:
                section = int(line[1:].split("-")[0])
            except ValueError:
                raise ValueError(f"line {lineno}: malformed section header {line!r}") from None
            in_header = False
            ngrams.setdefault(section, {})
            continue
        if in_header:
            parts = line.split("=")
            if len(parts) != 2 or not parts[0].startswith("ngram "):
                raise ValueError(f"line {lineno}: malformed count header {line!r}")
            try:
                declared[int(parts[0][len("ngram "):])] = int(parts[1])
            except ValueError:
                raise ValueError(f"line {lineno}: malformed count header {line!r}") from None
            continue
        if section is None:
            raise ValueError(f"line {lineno}: entry outside any n-gram section")
        fields = line.split("\t")
        if len(fields) not in (2, 3):
            raise ValueError(f"line {lineno}: expected 'logprob<TAB>symbols[<TAB>backoff]', got {line!r}")
        try:
            logprob = float(fields[0])
            backoff = float(fields[2]) if len(fields) == 3 else None
        except ValueError:
            raise ValueError(f"line {lineno}: non-numeric probability in {line!r}") from None
        symbols = tuple(unescape_symbol(tok) for tok in fields[1].split(" ") if tok)
        if len(symbols) != section:
            raise ValueError(f"line {lineno}: {len(symbols)}-gram entry in \\{section}-grams: section")
        ngrams[section][symbols] = (logprob, backoff)

    if not saw_end:
        raise ValueError("missing \\end\\ marker")
    for order, n in declared.items():
        found = len(ngrams.get(order, {}))
        if found != n:
            raise ValueError(f"\\{order}-grams: section declares {n} entries, found {found}")
    for order in ngrams:
        if order not in declared:
            raise ValueError(f"\\{order}-grams: section missing from the \\data\\ header")
    lm = CharLm(ngrams)
    if lm.order > 6:
        warnings.warn(f"language model order {lm.order} exceeds the expected maximum of 6")
    if validate:
        _validate_lm(lm)
    return lm


def _validate_lm(lm: CharLm) -> None:
    # every explicit higher-order entry must remain scorable after backoff
    for order in range(2, lm.order + 1):
        for key in lm.ngrams.get(order, {}):
            if key[-1] not in lm.vocabulary:
                raise ValueError(f"{order}-gram {key!r} ends in a symbol with no unigram entry")
    # conditional mass per explicit context must not exceed 1 (backoff holds the rest)
    by_context: dict[tuple[str, ...], float] = {}
    for order in range(1, lm.order + 1):
        for key, (logprob, _) in lm.ngrams.get(order, {}).items():
            by_context.setdefault(key[:-1], 0.0)
            by_context[key[:-1]] += 10.0 ** logprob
    for context, mass in by_context.items():
        if mass > 1.0 + 1e-3:
            raise ValueError(f"conditional probabilities for context {context!r} sum to {mass:.6f} > 1")


def save_charlm(lm: CharLm, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\\data\\\n")
        for order in sorted(lm.ngrams):
            fh.write(f"ngram {order}={len(lm.ngrams[order])}\n")
        fh.write("\n")
        for order in sorted(lm.ngrams):
            fh.write(f"\\{order}-grams:\n")
            for key, (logprob, backoff) in sorted(lm.ngrams[order].items()):
                symbols = " ".join(escape_symbol(s) for s in key)
                if backoff is None:
                    fh.write(f"{logprob}\t{symbols}\n")
                else:
                    fh.write(f"{logprob}\t{symbols}\t{backoff}\n")
            fh.write("\n")
        fh.write("\\end\\\n")


def greedy_decode(logits: np.ndarray, blank_index: int, symbols=DEFAULT_CHARSET) -> str:
    """Frame-wise argmax, collapse consecutive repeats, drop blanks.

    Backspace symbols are ordinary output keystrokes and are kept.
    """
    logits = check_logits(logits)
    if len(symbols) != logits.shape[1]:
        raise ValueError(f"symbol table covers {len(symbols)} entries, logits have vocab {logits.shape[1]}")
    path = np.argmax(logits, axis=1)
    out = []
    prev = -1
    for idx in path:
        if idx != prev and idx != blank_index:
            out.append(symbols[idx])
        prev = idx
    return "".join(out)


@dataclass(frozen=True)
class BeamHypothesis:
    """One CTC prefix with its score ledger."""

    prefix: str
    log_p_blank: float
    log_p_nonblank: float
    lm_contribution_stack: tuple[float, ...]  # natural-log contributions, one per surviving char
    surviving_text: str
    lm_weight: float
    insertion_bonus: float
    eos_bonus: float = 0.0  # lambda-weighted end-sentinel closure, natural log

    @property
    def lm_sum(self) -> float:
        return sum(self.lm_contribution_stack)

    @property
    def score(self) -> float:
        ctc = np.logaddexp(self.log_p_blank, self.log_p_nonblank)
        return float(ctc + self.lm_weight * self.lm_sum + self.insertion_bonus * len(self.prefix))

    @property
    def final_score(self) -> float:
        return self.score + self.eos_bonus


@dataclass
class _LmTrack:
    text: tuple[str, ...] = ()
    stack: tuple[float, ...] = ()
    lm_sum: float = 0.0


def _extend_lm(track: _LmTrack, sym: str, lm: CharLm | None, backspace: str) -> _LmTrack:
    if sym == backspace:
        if not track.stack:
            return track  # retraction under an empty context is a no-op
        return _LmTrack(track.text[:-1], track.stack[:-1], track.lm_sum - track.stack[-1])
    contrib = 0.0
    if lm is not None:
        contrib = LN10 * lm_score(lm, (BOS,) + track.text, sym)
    return _LmTrack(track.text + (sym,), track.stack + (contrib,), track.lm_sum + contrib)


def beam_search(
    logits: np.ndarray,
    lm: CharLm | None,
    config: DecodeConfig,
    symbols=DEFAULT_CHARSET,
) -> str:
    """Best keystroke sequence under CTC prefix beam search with LM re-ranking."""
    return beam_search_detailed(logits, lm, config, symbols)[0].prefix


def beam_search_detailed(
    logits: np.ndarray,
    lm: CharLm | None,
    config: DecodeConfig,
    symbols=DEFAULT_CHARSET,
) -> list[BeamHypothesis]:
    """Full beam with score ledgers, best hypothesis first."""
    logits = check_logits(logits)
    t_frames, vocab = logits.shape
    if len(symbols) != vocab:
        raise ValueError(f"symbol table covers {len(symbols)} entries, logits have vocab {vocab}")
    if not 0 <= config.blank_index < vocab:
        raise ValueError("blank_index outside the vocabulary")
    logp = log_softmax(logits, axis=1)
    lam, beta = config.lm_weight, config.insertion_bonus
    blank = config.blank_index
    neg_inf = float("-inf")

    lm_cache: dict[tuple[int, ...], _LmTrack] = {(): _LmTrack()}
    beam: dict[tuple[int, ...], list[float]] = {(): [0.0, neg_inf]}  # [log_p_blank, log_p_nonblank]

    def prune_score(prefix: tuple[int, ...], pb: float, pnb: float) -> float:
        track = lm_cache[prefix]
        return float(np.logaddexp(pb, pnb) + lam * track.lm_sum + beta * len(prefix))

    for t in range(t_frames):
        frame = logp[t]
        nxt: dict[tuple[int, ...], list[float]] = {}

        def bucket(prefix: tuple[int, ...]) -> list[float]:
            entry = nxt.get(prefix)
            if entry is None:
                entry = [neg_inf, neg_inf]
                nxt[prefix] = entry
                if prefix not in lm_cache:
                    parent = prefix[:-1]
                    lm_cache[prefix] = _extend_lm(
                        lm_cache[parent], symbols[prefix[-1]], lm, config.backspace_symbol
                    )
            return entry

        for prefix, (pb, pnb) in beam.items():
            total = np.logaddexp(pb, pnb)
            last = prefix[-1] if prefix else None

            entry = bucket(prefix)
            entry[0] = np.logaddexp(entry[0], total + frame[blank])
            if last is not None:
                entry[1] = np.logaddexp(entry[1], pnb + frame[last])

            for c in range(vocab):
                if c == blank:
                    continue
                ext = bucket(prefix + (c,))
                src = pb if c == last else total
                ext[1] = np.logaddexp(ext[1], src + frame[c])

        ranked = sorted(
            nxt.items(),
            key=lambda kv: (-prune_score(kv[0], kv[1][0], kv[1][1]),
                            "".join(symbols[i] for i in kv[0])),
        )
        beam = dict(ranked[: config.beam_size])

    hypotheses = []
    for prefix, (pb, pnb) in beam.items():
        track = lm_cache[prefix]
        eos_bonus = 0.0
        if lm is not None:
            eos_bonus = lam * LN10 * lm_score(lm, (BOS,) + track.text, EOS)
        hypotheses.append(
            BeamHypothesis(
                prefix="".join(symbols[i] for i in prefix),
                log_p_blank=float(pb),
                log_p_nonblank=float(pnb),
                lm_contribution_stack=track.stack,
                surviving_text="".join(track.text),
                lm_weight=lam,
                insertion_bonus=beta,
                eos_bonus=float(eos_bonus),
            )
        )
    hypotheses.sort(key=lambda h: (-h.final_score, h.prefix))
    return hypotheses
