import pytest

from streamcoach.catalog import ExerciseCatalog
from streamcoach.core import (
    VARIANT_FAST,
    VARIANT_MISTAKE_BASE,
    VARIANT_SLOW,
    build_vocabulary,
    normalize_words,
)


def test_default_catalog_shape(catalog):
    assert len(catalog) == 23
    assert len(catalog.pool("warmup")) >= 3
    assert len(catalog.pool("main")) >= 4
    assert len(catalog.pool("cooldown")) >= 3
    assert sorted(
        catalog.pool("warmup") + catalog.pool("main") + catalog.pool("cooldown")
    ) == list(range(1, 24))


def test_exercise_lookup_is_one_based(catalog):
    first = catalog.exercise(1)
    assert first.name
    with pytest.raises(ValueError):
        catalog.exercise(0)
    with pytest.raises(ValueError):
        catalog.exercise(24)


def test_every_exercise_has_templates(catalog):
    for i in range(1, len(catalog) + 1):
        ex = catalog.exercise(i)
        assert 2 <= len(ex.mistakes) <= 4
        assert ex.affirmatives and ex.instructionals
        for m in ex.mistakes:
            assert 3 <= len(m.correctives) <= 5


def test_templates_are_pre_normalized(catalog):
    for seq in catalog.all_template_word_sequences():
        assert seq == normalize_words(" ".join(seq))
        assert 1 <= len(seq) <= 20


def test_corrective_templates_by_variant(catalog):
    fast = catalog.corrective_templates(1, VARIANT_FAST)
    slow = catalog.corrective_templates(1, VARIANT_SLOW)
    assert fast == catalog.pacing_correctives["fast"]
    assert slow == catalog.pacing_correctives["slow"]
    ex = catalog.exercise(1)
    assert (
        catalog.corrective_templates(1, VARIANT_MISTAKE_BASE)
        == ex.mistakes[0].correctives
    )
    with pytest.raises(ValueError):
        catalog.corrective_templates(1, VARIANT_MISTAKE_BASE + len(ex.mistakes))


def test_n_variants_covers_largest_mistake_set(catalog):
    n = catalog.n_variants()
    assert n == VARIANT_MISTAKE_BASE + max(
        len(catalog.exercise(i).mistakes) for i in range(1, len(catalog) + 1)
    )


def test_yaml_roundtrip(catalog, tmp_path):
    path = tmp_path / "catalog.yaml"
    catalog.save(path)
    back = ExerciseCatalog.load(path)
    assert back.to_dict() == catalog.to_dict()
    a = build_vocabulary(catalog.all_template_word_sequences())
    b = build_vocabulary(back.all_template_word_sequences())
    assert a.content_hash() == b.content_hash()
