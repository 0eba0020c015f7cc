"""Synthetic interactive-prompt sessions.

Each session is a short caption that grows by one attribute clause per
round (subject, then setting, then style, ...), mimicking how a user
progressively refines a prompt. Clause lengths are deliberately mixed so
consecutive prompts span a wide range of semantic distances — that spread is
what makes the labeled strengths non-trivial to predict.
"""

from __future__ import annotations

import json
from typing import Dict, List, Sequence

import numpy as np

SUBJECTS = [
    "fox", "lighthouse", "sailboat", "street market", "mountain cabin", "violinist",
    "steam train", "koi pond", "desert caravan", "library", "astronaut", "waterfall",
    "ancient bridge", "tea house", "falcon", "glacier", "vineyard", "clock tower",
    "night market", "ferry", "observatory", "botanical garden", "drummer", "canyon",
]
ADJECTIVES = [
    "red", "weathered", "tiny", "sprawling", "gleaming", "forgotten",
    "bustling", "quiet", "painted", "frozen", "sunlit", "crooked",
]
SETTINGS = [
    "pine forest", "coastal village", "rainy city", "alpine meadow", "river delta",
    "old harbor", "lavender field", "volcanic plain", "bamboo grove", "salt flat",
    "misty valley", "rooftop garden", "cobblestone square", "frozen lake",
    "terraced hillside", "abandoned station",
]
MOODS = ["serene", "stormy", "golden", "foggy", "vivid", "dusky", "windswept", "tranquil"]
TIMES = ["dawn", "noon", "dusk", "midnight", "golden hour", "twilight"]
STYLES = [
    "watercolor", "oil painting", "ukiyo-e", "art deco", "cyberpunk", "impressionist",
    "charcoal sketch", "low poly", "stained glass", "retro poster", "pixel art", "baroque",
]
LIGHTING = ["candlelit", "neon", "moonlit", "backlit", "lantern", "overcast"]
DETAILS = [
    "with intricate fine details and a sharp focus on the foreground",
    "captured on vintage film with visible grain and soft focus",
    "with dramatic volumetric light rays and long shadows",
    "in ultra high resolution with crisp textures everywhere",
]

# Each refinement round appends one clause; templates are grouped per round
# and mixed between short and long variants on purpose, so consecutive
# prompts span a wide band of semantic distances.
_SETTING_TEMPLATES = [
    ", in a {setting}",
    ", set deep inside a {mood} {setting} under an open sky at {time}",
    ", surrounded by a vast {mood} {setting} stretching far toward the distant horizon at {time}",
]
_STYLE_TEMPLATES = [
    ", {style} style",
    ", rendered in a rich {style} style with layered brushwork and muted tones",
]
_LIGHTING_TEMPLATES = [
    ", {lighting} lighting",
    ", illuminated by soft {lighting} light that scatters across every surface",
]
_BASE_TEMPLATES = [
    "a {subject}",
    "a {adjective} {subject}",
    "a photo of a {adjective} {subject}",
]


def _base_caption(rng: np.random.Generator) -> str:
    template = _BASE_TEMPLATES[int(rng.integers(0, len(_BASE_TEMPLATES)))]
    return template.format(adjective=rng.choice(ADJECTIVES), subject=rng.choice(SUBJECTS))


def make_session_rounds(rng: np.random.Generator, n_rounds: int) -> List[str]:
    """Build one session: round k+1 strictly extends round k."""
    rounds = [_base_caption(rng)]
    clause_groups = [_SETTING_TEMPLATES, _STYLE_TEMPLATES, _LIGHTING_TEMPLATES]
    fields = {
        "setting": rng.choice(SETTINGS),
        "mood": rng.choice(MOODS),
        "time": rng.choice(TIMES),
        "style": rng.choice(STYLES),
        "lighting": rng.choice(LIGHTING),
    }
    extra = 0
    while len(rounds) < n_rounds:
        k = len(rounds) - 1
        if k < len(clause_groups):
            template = clause_groups[k][int(rng.integers(0, len(clause_groups[k])))]
            clause = template.format(**fields)
        elif extra < len(DETAILS):
            clause = ", " + DETAILS[int(rng.integers(0, len(DETAILS)))]
            extra += 1
        else:
            clause = f", refinement pass {extra}"
            extra += 1
        rounds.append(rounds[-1] + clause)
    return rounds


def generate_sessions(n_sessions: int, rounds_per_session: int, seed: int) -> List[Dict]:
    """Deterministic synthetic corpus of interactive sessions."""
    if n_sessions < 1 or rounds_per_session < 1:
        raise ValueError("n_sessions and rounds_per_session must be >= 1")
    rng = np.random.default_rng(seed)
    sessions = []
    for i in range(n_sessions):
        sessions.append(
            {"id": f"s{i:04d}", "rounds": make_session_rounds(rng, rounds_per_session)}
        )
    return sessions


def write_sessions(path: str, sessions: Sequence[Dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for session in sessions:
            fh.write(json.dumps(session) + "\n")


class DatasetParseError(ValueError):
    def __init__(self, path: str, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


def read_sessions(path: str) -> List[Dict]:
    sessions = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetParseError(path, line_no, f"invalid JSON: {exc.msg}") from exc
            if (
                not isinstance(rec, dict)
                or "id" not in rec
                or not isinstance(rec.get("rounds"), list)
                or not rec["rounds"]
                or not all(isinstance(r, str) for r in rec["rounds"])
            ):
                raise DatasetParseError(path, line_no, "expected {'id', 'rounds': [str, ...]}")
            sessions.append({"id": str(rec["id"]), "rounds": list(rec["rounds"])})
    return sessions


def pairs_from_sessions(sessions: Sequence[Dict]) -> List[Dict]:
    """Consecutive-round prompt pairs, the labeling pipeline's input."""
    pairs = []
    for session in sessions:
        rounds = session["rounds"]
        for k in range(1, len(rounds)):
            pairs.append(
                {
                    "id": f"{session['id']}:{k}",
                    "prompt_prev": rounds[k - 1],
                    "prompt_curr": rounds[k],
                }
            )
    return pairs


def write_pairs(path: str, pairs: Sequence[Dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(json.dumps(pair) + "\n")
