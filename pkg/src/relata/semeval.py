"""Convert a SemEval-2012 Task 2 style distribution into the relata dataset layout.

Expected input, per relation id such as ``2h``:

* ``Phase1Questions/Phase1Questions-<id>.txt``: prototypes are every
  ``x:y`` token on the line mentioning "Consider the following".
* ``Platinum/Platinumscores-<id>.txt``: ``<rating> "x:y"`` lines.
* ``Phase2Answers/Phase2Answers-<id>.txt`` (optional): MaxDiff lines
  ``p1,p2,p3,p4<TAB>least<TAB>most``.

Files are searched recursively below the root, so ``Testing/`` and
``Training/`` parents are both fine.
"""

from __future__ import annotations

import re
from pathlib import Path

from relata.corpus import LemmaDict, lemmatize, parse_pair
from relata.errors import FormatError
from relata.evaluation import GROUPS, MaxDiffQuestion, Relation, save_dataset

PAIR_RE = re.compile(r"[^\s,:\"']+:[^\s,:\"'.]+")
TRAINING_RELATIONS = frozenset({"1a", "2c", "2h", "3a", "3c", "4c", "5d", "5i", "7a", "10a"})


def group_of(rel_id: str) -> str:
    m = re.match(r"(\d+)", rel_id)
    if not m or not 1 <= int(m.group(1)) <= len(GROUPS):
        raise FormatError(f"relation id {rel_id!r} does not name a major group")
    return GROUPS[int(m.group(1)) - 1]


def _find(root: Path, stem: str, rel_id: str) -> Path | None:
    hits = sorted(root.rglob(f"{stem}-{rel_id}.txt"))
    return hits[0] if hits else None


def _pair(text: str, where: str, lemmas):
    a, b = parse_pair(text, where)
    return lemmatize(a, lemmas), lemmatize(b, lemmas)


def convert_relation(root: Path, rel_id: str, lemmas: LemmaDict | None = None) -> Relation:
    qfile = _find(root, "Phase1Questions", rel_id)
    sfile = _find(root, "Platinumscores", rel_id)
    if qfile is None or sfile is None:
        raise FormatError(f"relation {rel_id}: Phase1Questions or Platinumscores file missing")
    protos = []
    for line in qfile.read_text(encoding="utf-8", errors="replace").splitlines():
        if "consider the following" in line.lower():
            protos = [_pair(p, str(qfile), lemmas) for p in PAIR_RE.findall(line)]
            break
    targets = {}
    for n, line in enumerate(sfile.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        m = re.match(r"(-?[\d.]+)\s+\"?([^\"]+)\"?$", line)
        if not m:
            raise FormatError(f"{sfile}:{n}: expected '<rating> \"x:y\"'")
        targets[_pair(m.group(2), f"{sfile}:{n}", lemmas)] = float(m.group(1))
    questions = []
    afile = _find(root, "Phase2Answers", rel_id)
    if afile is not None:
        for n, line in enumerate(afile.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise FormatError(f"{afile}:{n}: expected 'p1,p2,p3,p4<TAB>least<TAB>most'")
            where = f"{afile}:{n}"
            cands = tuple(_pair(c.strip(), where, lemmas) for c in parts[0].strip('"').split(","))
            least, most = _pair(parts[1].strip('" '), where, lemmas), _pair(parts[2].strip('" '), where, lemmas)
            if all(c in targets for c in cands):
                questions.append(MaxDiffQuestion(cands, most, least))
    return Relation(rel_id, group_of(rel_id), protos, targets, questions)


def convert_semeval(src, dst, lemmas: LemmaDict | None = None, test_only: bool = True) -> list[Relation]:
    root = Path(src)
    ids = sorted(
        {p.stem.split("-", 1)[1] for p in root.rglob("Platinumscores-*.txt")},
        key=lambda r: (int(re.match(r"\d+", r).group()), r),
    )
    if test_only:
        ids = [r for r in ids if r not in TRAINING_RELATIONS]
    if not ids:
        raise FormatError(f"{root}: no Platinumscores-*.txt files found")
    relations = [convert_relation(root, r, lemmas) for r in ids]
    save_dataset(relations, dst)
    return relations
