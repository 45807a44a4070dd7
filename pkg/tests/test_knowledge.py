import pytest

from semnav.knowledge import (
    KnowledgeError, load_knowledge, load_profile, object_list, parse_knowledge,
)


def test_hm3d_toilet_entry():
    kb = load_profile("hm3d")
    e = kb.get("toilet")
    assert e.similar == ("chair", "bench", "potted plant", "sink")
    assert e.c_th == pytest.approx(0.45)
    assert e.room == "bathroom"


def test_hm3d_bed_entry():
    kb = load_profile("hm3d")
    e = kb.get("bed")
    assert e.c_th == pytest.approx(0.65)
    assert e.room == "bedroom"


def test_hm3d_full_label_set():
    kb = load_profile("hm3d")
    assert set(kb.targets()) == {"couch", "tv", "chair", "toilet", "bed",
                                 "potted plant"}
    assert kb.c_th_range == (0.25, 0.65)
    for e in kb.entries.values():
        assert 0.25 <= e.c_th <= 0.65
        assert 3 <= len(e.similar) <= 5


def test_mp3d_profile_range_and_labels():
    kb = load_profile("mp3d")
    assert kb.c_th_range == (0.25, 0.35)
    assert len(kb.targets()) == 21
    assert kb.get("cabinet").similar == ("refrigerator", "door")
    for e in kb.entries.values():
        assert 0.25 <= e.c_th <= 0.35


def test_threshold_out_of_range_rejected():
    text = """
profile: custom
c_th_range: 0.25 0.65
similar_range: 3 5
lamp: chair, tv, bed | 0.90 | everywhere
"""
    with pytest.raises(KnowledgeError, match="lamp"):
        parse_knowledge(text)


def test_similar_list_size_violation_rejected():
    text = """
c_th_range: 0.25 0.65
similar_range: 3 5
lamp: chair | 0.40 | everywhere
"""
    with pytest.raises(KnowledgeError, match="lamp"):
        parse_knowledge(text)


def test_malformed_entry_named():
    with pytest.raises(KnowledgeError, match="lamp"):
        parse_knowledge("lamp: chair, tv, bed | 0.4")


def test_object_list_target_first():
    kb = load_profile("hm3d")
    lobj = object_list(kb, "toilet")
    assert lobj == ["toilet", "chair", "bench", "potted plant", "sink"]
    assert len(lobj) == 5


def test_object_list_without_similar():
    kb = load_profile("hm3d")
    assert object_list(kb, "toilet", include_similar=False) == ["toilet"]


def test_object_list_unknown_target():
    kb = load_profile("hm3d")
    with pytest.raises(KnowledgeError):
        object_list(kb, "sofa")


def test_load_identical_across_reads(tmp_path):
    kb1 = load_profile("hm3d")
    kb2 = load_profile("hm3d")
    assert kb1 == kb2
    # file round trip through an explicit path
    p = tmp_path / "kb.txt"
    p.write_text(
        "profile: t\nc_th_range: 0.25 0.65\nsimilar_range: 3 5\n"
        "bed: couch, dining table, bench | 0.65 | bedroom\n",
        encoding="utf-8")
    kb = load_knowledge(p)
    assert kb.get("bed").c_th == 0.65
