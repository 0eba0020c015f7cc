"""Ground-truth strength construction.

For each (previous prompt, current prompt) pair we run the img2img pipeline
once per candidate strength, score every output against the current prompt,
and take the argmax as the label. Ties break toward the smallest strength
(cheapest generation at equal alignment). The full score curve is persisted
alongside the argmax so pairs can be re-labeled under a different policy
without re-running any backend.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

from .backends import BackendUnavailable, MissingSemanticVector, ProtocolError, RemoteTimeout
from .core import CandidateSet
from .scheduler import DenoisePlan, contiguous_schedule, steps_for_strength
from .util import derive_seed

DEFAULT_LABEL_BASE_STEPS = 25


class BackendFailure(Exception):
    """A backend call failed while labeling; the pair is aborted, never fabricated."""


class PairsParseError(ValueError):
    """Input pairs file is malformed."""

    def __init__(self, path: str, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


@dataclass(frozen=True)
class LabeledPair:
    pair_id: str
    prompt_prev: str
    prompt_curr: str
    s_star: float
    score_curve: Tuple[Tuple[float, float], ...]

    def __post_init__(self) -> None:
        scores = dict(self.score_curve)
        if self.s_star not in scores:
            raise ValueError("s_star must appear in the score curve")
        if scores[self.s_star] != max(s for _, s in self.score_curve):
            raise ValueError("s_star must attain the maximal score")


def default_plan_builder(strength: float, base_steps: int = DEFAULT_LABEL_BASE_STEPS) -> DenoisePlan:
    return contiguous_schedule(strength, steps_for_strength(strength, base_steps))


def label_strength(
    image_prev,
    prompt_curr: str,
    grid: CandidateSet,
    backend,
    scorer,
    seed: int,
    pair_id: str = "",
    prompt_prev: str = "",
    plan_builder: Callable[[float], DenoisePlan] = default_plan_builder,
) -> LabeledPair:
    """Exhaustive scan over the candidate grid; argmax with smallest-strength tie-break.

    All candidates run under the same seed so the only varying input is the
    strength itself.
    """
    curve = []
    best_s: Optional[float] = None
    best_score = float("-inf")
    for s in grid:
        try:
            image = backend.img2img(image_prev, prompt_curr, plan_builder(s), seed)
            score = float(scorer.score(image, prompt_curr))
        except (BackendUnavailable, ProtocolError, RemoteTimeout, MissingSemanticVector) as exc:
            raise BackendFailure(f"pair {pair_id!r} aborted at strength {s}: {exc}") from exc
        curve.append((s, score))
        if score > best_score:
            best_score = score
            best_s = s
    return LabeledPair(
        pair_id=pair_id,
        prompt_prev=prompt_prev,
        prompt_curr=prompt_curr,
        s_star=best_s,
        score_curve=tuple(curve),
    )


def read_pairs(path: str):
    """Parse a JSONL pairs file: {"id", "prompt_prev", "prompt_curr"} per line."""
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise PairsParseError(path, line_no, f"invalid JSON: {exc.msg}") from exc
            if not isinstance(rec, dict):
                raise PairsParseError(path, line_no, "expected a JSON object")
            try:
                pair = (str(rec["id"]), str(rec["prompt_prev"]), str(rec["prompt_curr"]))
            except KeyError as exc:
                raise PairsParseError(path, line_no, f"missing key {exc}") from exc
            pairs.append(pair)
    return pairs


def _count_complete_lines(path: str) -> int:
    if not os.path.exists(path):
        return 0
    count = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.endswith("\n") and line.strip():
                json.loads(line)  # a torn line would raise; caller treats file as authoritative
                count += 1
    return count


def build_label_dataset(
    pairs_path: str,
    out_path: str,
    grid: CandidateSet,
    backend,
    scorer,
    seed: int,
    base_steps: int = DEFAULT_LABEL_BASE_STEPS,
    resume: bool = False,
    progress: Optional[Callable[[int, int], None]] = None,
) -> int:
    """Label every pair in the input file; returns the number of pairs written.

    Deterministic for a fixed seed (each pair gets a sub-seed derived from
    the root seed and its id, so output does not depend on position).
    Output is flushed per line, so a partial file is valid JSONL and a
    resumed run picks up at the first unlabeled pair.
    """
    pairs = read_pairs(pairs_path)
    skip = _count_complete_lines(out_path) if resume else 0
    mode = "a" if resume and skip else "w"
    written = 0
    with open(out_path, mode, encoding="utf-8") as out:
        for index, (pair_id, prompt_prev, prompt_curr) in enumerate(pairs):
            if index < skip:
                continue
            pair_seed = derive_seed(seed, pair_id)
            image_prev = backend.txt2img(prompt_prev, base_steps, pair_seed)
            if hasattr(scorer, "begin_pair"):
                scorer.begin_pair(pair_id)
            labeled = label_strength(
                image_prev,
                prompt_curr,
                grid,
                backend,
                scorer,
                pair_seed,
                pair_id=pair_id,
                prompt_prev=prompt_prev,
            )
            out.write(
                json.dumps(
                    {
                        "id": labeled.pair_id,
                        "s_star": labeled.s_star,
                        "curve": [[s, score] for s, score in labeled.score_curve],
                    }
                )
                + "\n"
            )
            out.flush()
            written += 1
            if progress is not None:
                progress(index + 1, len(pairs))
    return written


def read_labels(path: str):
    """Parse a labels JSONL file into a list of (id, s_star, curve) tuples."""
    labels = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                labels.append(
                    (str(rec["id"]), float(rec["s_star"]), [tuple(p) for p in rec["curve"]])
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise PairsParseError(path, line_no, f"malformed label line: {exc}") from exc
    return labels
