import pytest

from relata.errors import FormatError
from relata.evaluation import load_dataset
from relata.semeval import convert_semeval, group_of


def _write_relation(root, rel_id, protos, scores, answers=None):
    (root / "Phase1Questions").mkdir(parents=True, exist_ok=True)
    (root / "Platinum").mkdir(exist_ok=True)
    (root / "Phase1Questions" / f"Phase1Questions-{rel_id}.txt").write_text(
        "Some header\nConsider the following word pairs: " + ", ".join(protos) + ".\nMore text\n")
    (root / "Platinum" / f"Platinumscores-{rel_id}.txt").write_text(
        "# Format: rating pair\n" + "".join(f'{r} "{p}"\n' for p, r in scores.items()))
    if answers:
        (root / "Phase2Answers").mkdir(exist_ok=True)
        (root / "Phase2Answers" / f"Phase2Answers-{rel_id}.txt").write_text(
            "".join(f'{",".join(c)}\t"{least}"\t"{most}"\n' for c, least, most in answers))


def test_group_of():
    assert group_of("1a") == "Class-Inclusion"
    assert group_of("10f") == "Reference"
    with pytest.raises(FormatError):
        group_of("11a")


def test_convert_round_trip(tmp_path):
    src = tmp_path / "semeval"
    scores = {"house:roof": 40.0, "tree:leaf": 32.5, "book:page": 10.0, "dog:cat": -20.0}
    cands = ("house:roof", "tree:leaf", "book:page", "dog:cat")
    _write_relation(src, "2b", ["car:wheel", "hand:finger"], scores, [(cands, "dog:cat", "house:roof")])
    _write_relation(src, "2h", ["a:b"], {"c:d": 1.0, "e:f": 2.0})  # a training relation
    rels = convert_semeval(src, tmp_path / "out")
    assert [r.id for r in rels] == ["2b"]
    (rel,) = load_dataset(tmp_path / "out")
    assert rel.group == "Part-Whole"
    assert rel.prototypes == [("car", "wheel"), ("hand", "finger")]
    assert rel.targets[("tree", "leaf")] == 32.5
    (q,) = rel.questions
    assert q.most == ("house", "roof") and q.least == ("dog", "cat")
    both = convert_semeval(src, tmp_path / "all", test_only=False)
    assert [r.id for r in both] == ["2b", "2h"]


def test_convert_empty_source(tmp_path):
    with pytest.raises(FormatError):
        convert_semeval(tmp_path, tmp_path / "out")
