"""Exercise catalog: names, sections, mistakes, and feedback templates.

The default catalog covers a 23-exercise workout split into warm-up, main,
and cool-down pools. Template text is pre-normalized (lowercase, no
punctuation) so the corpus stays closed-vocabulary. Catalogs can be loaded
from / saved to human-editable YAML files.
"""

from __future__ import annotations

from dataclasses import dataclass

import yaml

from .core import (
    VARIANT_FAST,
    VARIANT_MISTAKE_BASE,
    VARIANT_SLOW,
    normalize_words,
)

SECTIONS = ("warmup", "main", "cooldown")


@dataclass(frozen=True)
class Mistake:
    name: str
    correctives: tuple  # 3-5 surface forms


@dataclass(frozen=True)
class Exercise:
    name: str
    section: str
    mistakes: tuple  # 2-4 Mistake
    affirmatives: tuple
    instructionals: tuple


class ExerciseCatalog:
    """Read-only exercise lookup; exercise ids are 1-based (0 = sentinel)."""

    def __init__(self, exercises, pacing_correctives):
        self.exercises = tuple(exercises)
        # pacing mistakes (fast/slow) share templates across exercises
        self.pacing_correctives = dict(pacing_correctives)
        for ex in self.exercises:
            if ex.section not in SECTIONS:
                raise ValueError(f"unknown section {ex.section!r} for {ex.name}")
            if not (2 <= len(ex.mistakes) <= 4):
                raise ValueError(f"{ex.name}: need 2-4 mistakes")
            if not ex.affirmatives or not ex.instructionals:
                raise ValueError(f"{ex.name}: missing template kind")
            for m in ex.mistakes:
                if not m.correctives:
                    raise ValueError(f"{ex.name}/{m.name}: no corrective templates")
        for sec in SECTIONS:
            if not self.pool(sec):
                raise ValueError(f"empty exercise pool for section {sec!r}")

    def __len__(self):
        return len(self.exercises)

    def pool(self, section):
        return [i + 1 for i, ex in enumerate(self.exercises) if ex.section == section]

    def exercise(self, exercise_id):
        if not 1 <= exercise_id <= len(self.exercises):
            raise ValueError(f"exercise id out of range: {exercise_id}")
        return self.exercises[exercise_id - 1]

    def n_variants(self):
        max_mistakes = max(len(ex.mistakes) for ex in self.exercises)
        return VARIANT_MISTAKE_BASE + max_mistakes

    def corrective_templates(self, exercise_id, variant_id):
        """Templates for a mistake-class variant (fast/slow/mistake_k)."""
        if variant_id == VARIANT_FAST:
            return self.pacing_correctives["fast"]
        if variant_id == VARIANT_SLOW:
            return self.pacing_correctives["slow"]
        ex = self.exercise(exercise_id)
        k = variant_id - VARIANT_MISTAKE_BASE
        if not 0 <= k < len(ex.mistakes):
            raise ValueError(f"variant {variant_id} is not a mistake of {ex.name}")
        return ex.mistakes[k].correctives

    def all_template_word_sequences(self):
        """Every realizable feedback as a word tuple (for vocabulary builds)."""
        out = []
        for ex in self.exercises:
            for m in ex.mistakes:
                out.extend(normalize_words(t) for t in m.correctives)
            out.extend(normalize_words(t) for t in ex.affirmatives)
            out.extend(normalize_words(t) for t in ex.instructionals)
        for templates in self.pacing_correctives.values():
            out.extend(normalize_words(t) for t in templates)
        return out

    def to_dict(self):
        return {
            "pacing_correctives": {
                k: list(v) for k, v in self.pacing_correctives.items()
            },
            "exercises": [
                {
                    "name": ex.name,
                    "section": ex.section,
                    "mistakes": [
                        {"name": m.name, "correctives": list(m.correctives)}
                        for m in ex.mistakes
                    ],
                    "affirmatives": list(ex.affirmatives),
                    "instructionals": list(ex.instructionals),
                }
                for ex in self.exercises
            ],
        }

    @classmethod
    def from_dict(cls, data):
        exercises = [
            Exercise(
                name=e["name"],
                section=e["section"],
                mistakes=tuple(
                    Mistake(m["name"], tuple(m["correctives"])) for m in e["mistakes"]
                ),
                affirmatives=tuple(e["affirmatives"]),
                instructionals=tuple(e["instructionals"]),
            )
            for e in data["exercises"]
        ]
        return cls(exercises, data["pacing_correctives"])

    def save(self, path):
        with open(path, "w") as f:
            yaml.safe_dump(self.to_dict(), f, sort_keys=False)

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_dict(yaml.safe_load(f))


# ---------------------------------------------------------------------------
# Default catalog

_PACING = {
    "fast": (
        "slow down a little",
        "take it a bit slower",
        "no need to rush there",
        "ease off the pace slightly",
    ),
    "slow": (
        "pick up the pace",
        "a little faster now",
        "push the pace a bit",
        "lets speed that up",
    ),
}

# Mistake archetypes: name -> corrective surface forms ({ex} = exercise name)
_ARCHETYPES = {
    "shallow": (
        "go deeper on your {ex}",
        "get lower with each rep",
        "sink deeper into the movement",
        "more depth on those {ex}",
    ),
    "arms_low": (
        "lift your arms higher",
        "get those arms all the way up",
        "raise your arms fully overhead",
        "arms up higher please",
    ),
    "knees_low": (
        "raise your knees higher",
        "get those knees up",
        "drive your knees up higher",
        "knees to hip height please",
    ),
    "back_arch": (
        "keep your back straight",
        "flatten out your back",
        "watch your back keep it flat",
        "no arching in the lower back",
    ),
    "off_balance": (
        "steady yourself and find your balance",
        "keep your core tight for balance",
        "stay balanced through the whole movement",
    ),
    "half_rep": (
        "complete the full range of motion",
        "finish each rep all the way",
        "full reps please no shortcuts",
        "take every rep through the full range",
    ),
    "elbows_flare": (
        "keep your elbows tucked in",
        "elbows closer to your body",
        "stop flaring your elbows out",
    ),
    "hips_sag": (
        "lift your hips back in line",
        "keep your hips level",
        "dont let your hips sag",
    ),
    "heels_up": (
        "keep your heels on the floor",
        "press through your heels",
        "heels down through the whole rep",
    ),
    "short_stride": (
        "take a bigger step forward",
        "lengthen out your stride",
        "bigger steps on each rep",
    ),
    "loose_core": (
        "brace your core harder",
        "keep your stomach tight",
        "tighten up through the middle",
    ),
    "shallow_stretch": (
        "reach a little further into the stretch",
        "hold the stretch a touch deeper",
        "lean further into it gently",
    ),
}

_AFFIRMATIVE_GENERIC = (
    "good job keep it up",
    "nice work looking strong",
    "that is much better",
    "well done keep going",
    "great rhythm stay with it",
)

_INSTRUCTIONAL_FORMS = (
    "time for {ex} lets go",
    "next up {ex}",
    "get ready for {ex}",
    "now we move to {ex}",
)

# name, section, mistake archetype names (2-4 each)
_EXERCISES = [
    ("jumping jacks", "warmup", ["arms_low", "half_rep", "loose_core"]),
    ("high knees", "warmup", ["knees_low", "heels_up"]),
    ("butt kickers", "warmup", ["half_rep", "knees_low", "loose_core"]),
    ("air jump rope", "warmup", ["arms_low", "heels_up"]),
    ("good mornings", "warmup", ["back_arch", "shallow", "loose_core"]),
    ("push ups", "main", ["elbows_flare", "hips_sag", "half_rep", "shallow"]),
    ("plank taps", "main", ["hips_sag", "loose_core"]),
    ("moving plank", "main", ["hips_sag", "loose_core", "off_balance"]),
    ("squats", "main", ["shallow", "heels_up", "back_arch", "knees_low"]),
    ("walking lunges", "main", ["short_stride", "off_balance", "shallow"]),
    ("lunge jumps", "main", ["shallow", "off_balance"]),
    ("puddle jumps", "main", ["half_rep", "off_balance"]),
    ("mountain climbers", "main", ["knees_low", "hips_sag", "loose_core"]),
    ("floor touches", "main", ["back_arch", "shallow"]),
    ("quick feet", "main", ["half_rep", "heels_up"]),
    ("squat jumps", "main", ["shallow", "half_rep", "heels_up"]),
    ("squat kicks", "main", ["shallow", "off_balance", "half_rep"]),
    ("standing kicks", "main", ["knees_low", "off_balance"]),
    ("boxing squat punches", "main", ["shallow", "arms_low", "elbows_flare"]),
    ("deltoid stretch", "cooldown", ["shallow_stretch", "loose_core"]),
    ("quad stretch", "cooldown", ["off_balance", "shallow_stretch"]),
    ("shoulder gators", "cooldown", ["arms_low", "shallow_stretch"]),
    ("toe touchers", "cooldown", ["back_arch", "shallow_stretch"]),
]


def _realize(template, name):
    return template.format(ex=name)


def default_catalog():
    exercises = []
    for name, section, archetype_names in _EXERCISES:
        mistakes = tuple(
            Mistake(a, tuple(_realize(t, name) for t in _ARCHETYPES[a]))
            for a in archetype_names
        )
        affirmatives = _AFFIRMATIVE_GENERIC + (
            f"great form on those {name}",
            f"those {name} look really good",
        )
        instructionals = tuple(_realize(t, name) for t in _INSTRUCTIONAL_FORMS)
        exercises.append(
            Exercise(name, section, mistakes, affirmatives, instructionals)
        )
    return ExerciseCatalog(exercises, _PACING)
