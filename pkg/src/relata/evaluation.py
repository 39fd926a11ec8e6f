"""Relational-similarity evaluation: datasets, scorers, MaxDiff and Spearman."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from relata import __version__
from relata.corpus import LemmaDict, Pair, lemmatize, parse_pair
from relata.embeddings import EmbeddingTable
from relata.errors import EvaluationError, FormatError, OOVError, UndefinedCorrelationError
from relata.lra import LraModel, cosine
from relata.nlra import NlraModel

log = logging.getLogger(__name__)

GROUPS = (
    "Class-Inclusion",
    "Part-Whole",
    "Similar",
    "Contrast",
    "Attribute",
    "Non-Attribute",
    "Case Relations",
    "Cause-Purpose",
    "Space-Time",
    "Reference",
)


@dataclass(frozen=True)
class MaxDiffQuestion:
    candidates: tuple[Pair, Pair, Pair, Pair]
    most: Pair
    least: Pair

    def __post_init__(self):
        if len(self.candidates) != 4:
            raise FormatError("a MaxDiff question needs exactly four candidates")
        if self.most not in self.candidates or self.least not in self.candidates:
            raise FormatError("MaxDiff gold answers must be among the candidates")
        if self.most == self.least:
            raise FormatError("MaxDiff most and least answers coincide")


@dataclass
class Relation:
    id: str
    group: str
    prototypes: list[Pair]
    targets: dict[Pair, float]
    questions: list[MaxDiffQuestion] = field(default_factory=list)

    def __post_init__(self):
        if not self.prototypes:
            raise FormatError(f"relation {self.id}: no prototypical pairs")
        if len(self.targets) < 2:
            raise FormatError(f"relation {self.id}: needs at least 2 rated targets")

    def pairs(self) -> list[Pair]:
        seen = dict.fromkeys(self.prototypes)
        seen.update(dict.fromkeys(self.targets))
        return list(seen)


# ---------------------------------------------------------------- loading

def _norm_pair(text: str, where: str, lemmas: LemmaDict | None) -> Pair:
    a, b = parse_pair(text, where)
    return lemmatize(a, lemmas), lemmatize(b, lemmas)


def _lines(path: Path):
    if not path.is_file():
        raise FormatError(f"{path}: missing file")
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if line.strip() and not line.startswith("#"):
                yield lineno, line


def load_relation(directory, rel_id: str, group: str, lemmas: LemmaDict | None = None) -> Relation:
    d = Path(directory)
    protos = [_norm_pair(line.strip(), f"{d / 'prototypes.txt'}:{n}", lemmas)
              for n, line in _lines(d / "prototypes.txt")]
    targets: dict[Pair, float] = {}
    for n, line in _lines(d / "targets.txt"):
        where = f"{d / 'targets.txt'}:{n}"
        parts = line.split("\t")
        if len(parts) != 2:
            raise FormatError(f"{where}: expected 'a:b<TAB>rating'")
        pair = _norm_pair(parts[0].strip(), where, lemmas)
        try:
            rating = float(parts[1])
        except ValueError:
            raise FormatError(f"{where}: bad rating {parts[1]!r}") from None
        if pair in targets:
            raise FormatError(f"{where}: duplicate target {pair[0]}:{pair[1]}")
        targets[pair] = rating
    questions = []
    qpath = d / "maxdiff.txt"
    if qpath.is_file():
        for n, line in _lines(qpath):
            where = f"{qpath}:{n}"
            parts = line.split("\t")
            if len(parts) != 3:
                raise FormatError(f"{where}: expected 'p1|p2|p3|p4<TAB>most<TAB>least'")
            cands = tuple(_norm_pair(c.strip(), where, lemmas) for c in parts[0].split("|"))
            most = _norm_pair(parts[1].strip(), where, lemmas)
            least = _norm_pair(parts[2].strip(), where, lemmas)
            for p in cands:
                if p not in targets:
                    raise FormatError(f"{where}: question references unknown pair {p[0]}:{p[1]}")
            try:
                questions.append(MaxDiffQuestion(cands, most, least))
            except FormatError as exc:
                raise FormatError(f"{where}: {exc}") from None
    return Relation(rel_id, group, protos, targets, questions)


def load_dataset(root, lemmas: LemmaDict | None = None) -> list[Relation]:
    """Read ``manifest.tsv`` (``relation_id<TAB>group``) and one directory per relation."""
    root = Path(root)
    relations = []
    for n, line in _lines(root / "manifest.tsv"):
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0].strip():
            raise FormatError(f"{root / 'manifest.tsv'}:{n}: expected 'relation_id<TAB>group'")
        rel_id, group = parts[0].strip(), parts[1].strip()
        relations.append(load_relation(root / rel_id, rel_id, group, lemmas))
    if not relations:
        raise FormatError(f"{root / 'manifest.tsv'}: no relations listed")
    return relations


def save_dataset(relations: Sequence[Relation], root) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    manifest = []
    for rel in relations:
        d = root / rel.id
        d.mkdir(exist_ok=True)
        (d / "prototypes.txt").write_text("".join(f"{a}:{b}\n" for a, b in rel.prototypes), encoding="utf-8")
        (d / "targets.txt").write_text(
            "".join(f"{a}:{b}\t{r!r}\n" for (a, b), r in rel.targets.items()), encoding="utf-8"
        )
        (d / "maxdiff.txt").write_text(
            "".join(
                "|".join(f"{a}:{b}" for a, b in q.candidates)
                + f"\t{q.most[0]}:{q.most[1]}\t{q.least[0]}:{q.least[1]}\n"
                for q in rel.questions
            ),
            encoding="utf-8",
        )
        manifest.append(f"{rel.id}\t{rel.group}\n")
    (root / "manifest.tsv").write_text("".join(manifest), encoding="utf-8")


# ---------------------------------------------------------------- scorers

class Scorer:
    """Scores a target pair by mean cosine to the relation's prototypes.

    Subclasses supply ``representation(pair)``; ``None`` marks a pair the
    model cannot represent (OOV or no pattern), which contributes cosine 0.
    """

    name = "model"
    missing_label = "missing"

    def __init__(self):
        self._cache: dict[Pair, np.ndarray | None] = {}

    def representation(self, pair: Pair) -> np.ndarray | None:
        raise NotImplementedError

    def prepare(self, pairs: Sequence[Pair]) -> None:
        """Hook for batched precomputation; the default is lazy."""

    def _rep(self, pair: Pair):
        if pair not in self._cache:
            self._cache[pair] = self.representation(pair)
        return self._cache[pair]

    def covers(self, pair: Pair) -> bool:
        return self._rep(pair) is not None

    def score(self, relation: Relation, pair: Pair) -> float:
        rep = self._rep(pair)
        if rep is None:
            return 0.0
        sims = []
        for proto in relation.prototypes:
            prep = self._rep(proto)
            sims.append(0.0 if prep is None else cosine(rep, prep))
        return float(np.mean(sims))


class VecOffScorer(Scorer):
    name = "vecoff"
    missing_label = "oov"

    def __init__(self, table: EmbeddingTable):
        super().__init__()
        self.table = table

    def representation(self, pair):
        va, vb = self.table.lookup(pair[0]), self.table.lookup(pair[1])
        if va is None or vb is None:
            return None
        return vb.astype(np.float64) - va


class LraScorer(Scorer):
    name = "lra"
    missing_label = "no_pattern"

    def __init__(self, model: LraModel):
        super().__init__()
        self.model = model

    def representation(self, pair):
        return self.model.vector(*pair)


class NlraScorer(Scorer):
    name = "nlra"
    missing_label = "oov"

    def __init__(self, model: NlraModel):
        super().__init__()
        self.model = model

    def representation(self, pair):
        try:
            return self.model.pair_representation(*pair)
        except OOVError:
            return None

    def prepare(self, pairs):
        vocab = self.model.table.vocab
        todo = sorted({p for p in pairs if p not in self._cache})
        known = [p for p in todo if p[0] in vocab and p[1] in vocab and "<unk>" not in p]
        reps = self.model.pair_representations(known)
        for p, r in zip(known, reps):
            self._cache[p] = r
        for p in todo:
            self._cache.setdefault(p, None)


class CombinedScorer(Scorer):
    """Arithmetic mean of two scorers' scores."""

    def __init__(self, first: Scorer, second: Scorer, name: str | None = None):
        super().__init__()
        self.first, self.second = first, second
        self.name = name or f"{first.name}+{second.name}"

    def prepare(self, pairs):
        self.first.prepare(pairs)
        self.second.prepare(pairs)

    def covers(self, pair):
        return self.first.covers(pair) and self.second.covers(pair)

    def score(self, relation, pair):
        return combine(self.first.score(relation, pair), self.second.score(relation, pair))


class OracleScorer(Scorer):
    """Returns the gold rating itself; a sanity check for the metric pipeline."""

    name = "oracle"

    def representation(self, pair):
        return np.ones(1)

    def score(self, relation, pair):
        return float(relation.targets[pair])


def vecoff_score(table: EmbeddingTable, relation: Relation, pair: Pair) -> float:
    return VecOffScorer(table).score(relation, pair)


def model_score(scorer: Scorer, relation: Relation, pair: Pair) -> float:
    return scorer.score(relation, pair)


def combine(score_a: float, score_b: float) -> float:
    return (score_a + score_b) / 2.0


# ---------------------------------------------------------------- metrics

def maxdiff_accuracy(scores: Mapping[Pair, float], questions: Sequence[MaxDiffQuestion]) -> float:
    """Share of correct most/least picks; ties go to the lexicographically
    smallest pair for "most" and the largest for "least"."""
    if not questions:
        raise EvaluationError("no MaxDiff questions")
    correct = 0
    for q in questions:
        for p in q.candidates:
            if p not in scores:
                raise EvaluationError(f"no score for pair {p[0]}:{p[1]}")
        most = min(q.candidates, key=lambda p: (-scores[p], p))
        least = max(q.candidates, key=lambda p: (-scores[p], p))
        correct += (most == q.most) + (least == q.least)
    return correct / (2 * len(questions))


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks with ties sharing their mean rank."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="mergesort")
    ranks = np.empty(len(v), dtype=np.float64)
    sv = v[order]
    i = 0
    while i < len(v):
        j = i
        while j + 1 < len(v) and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(scores: Mapping[Pair, float], gold: Mapping[Pair, float]) -> float:
    keys = sorted(gold)
    if len(keys) < 2:
        raise UndefinedCorrelationError("Spearman correlation needs at least 2 pairs")
    missing = [k for k in keys if k not in scores]
    if missing:
        raise EvaluationError(f"no score for pair {missing[0][0]}:{missing[0][1]}")
    rx = average_ranks([scores[k] for k in keys])
    ry = average_ranks([gold[k] for k in keys])
    rx -= rx.mean()
    ry -= ry.mean()
    denom = np.sqrt((rx @ rx) * (ry @ ry))
    if denom == 0:
        raise UndefinedCorrelationError("Spearman correlation undefined for constant ranks")
    return float(np.clip(rx @ ry / denom, -1.0, 1.0))


# ---------------------------------------------------------------- report

@dataclass
class RelationResult:
    id: str
    group: str
    accuracy: float
    correlation: float
    n_targets: int
    n_missing: int
    correlation_defined: bool = True


@dataclass
class EvalReport:
    model: str
    relations: list[RelationResult]
    missing_label: str = "missing"
    meta: dict = field(default_factory=dict)

    @property
    def groups(self) -> dict[str, tuple[float, float]]:
        out = {}
        for g in sorted({r.group for r in self.relations}, key=_group_key):
            members = [r for r in self.relations if r.group == g]
            out[g] = (_mean_defined([r.accuracy for r in members]),
                      float(np.mean([r.correlation for r in members])))
        return out

    @property
    def accuracy(self) -> float:
        return _mean_defined([r.accuracy for r in self.relations])

    @property
    def correlation(self) -> float:
        return float(np.mean([r.correlation for r in self.relations]))

    @property
    def n_missing(self) -> int:
        return sum(r.n_missing for r in self.relations)

    def to_text(self) -> str:
        out = [f"model: {self.model}"]
        for key, value in sorted(self.meta.items()):
            out.append(f"{key}: {json.dumps(value, sort_keys=True)}")
        out.append(f"accuracy: {self.accuracy:.6f}")
        out.append(f"correlation: {self.correlation:.6f}")
        out.append(f"{self.missing_label}_pairs: {self.n_missing}")
        out.append("")
        for g, (acc, rho) in self.groups.items():
            out += [f"group: {g}", f"  accuracy: {acc:.6f}", f"  correlation: {rho:.6f}", ""]
        for r in sorted(self.relations, key=lambda r: r.id):
            out += [
                f"relation: {r.id}",
                f"  group: {r.group}",
                f"  accuracy: {r.accuracy:.6f}",
                f"  correlation: {r.correlation:.6f}"
                + ("" if r.correlation_defined else " (undefined, reported as 0)"),
                f"  {self.missing_label}_pairs: {r.n_missing}/{r.n_targets}",
                "",
            ]
        return "\n".join(out)

    def to_tsv(self) -> str:
        lines = [f"# relata {__version__}\n", f"# model {self.model}\n",
                 f"# missing_label {self.missing_label}\n"]
        if self.meta:
            lines.append(f"# config {json.dumps(self.meta, sort_keys=True)}\n")
        lines.append("level\tid\tgroup\taccuracy\tcorrelation\tn_targets\tn_missing\tcorrelation_defined\n")
        for r in sorted(self.relations, key=lambda r: r.id):
            lines.append(f"relation\t{r.id}\t{r.group}\t{r.accuracy!r}\t{r.correlation!r}\t"
                         f"{r.n_targets}\t{r.n_missing}\t{int(r.correlation_defined)}\n")
        for g, (acc, rho) in self.groups.items():
            lines.append(f"group\t{g}\t{g}\t{acc!r}\t{rho!r}\t\t\t\n")
        lines.append(f"overall\tall\tall\t{self.accuracy!r}\t{self.correlation!r}\t\t{self.n_missing}\t\n")
        return "".join(lines)

    @classmethod
    def from_tsv(cls, text: str) -> "EvalReport":
        model, label, meta, rels = "model", "missing", {}, []
        for line in text.splitlines():
            if line.startswith("# model "):
                model = line[len("# model "):]
            elif line.startswith("# missing_label "):
                label = line[len("# missing_label "):]
            elif line.startswith("# config "):
                meta = json.loads(line[len("# config "):])
            elif line.startswith("relation\t"):
                f = line.split("\t")
                rels.append(RelationResult(f[1], f[2], float(f[3]), float(f[4]), int(f[5]),
                                           int(f[6]), bool(int(f[7]))))
        return cls(model, rels, label, meta)


def _mean_defined(values) -> float:
    """Mean over non-NaN entries (relations without MaxDiff questions are NaN)."""
    v = np.asarray(values, dtype=np.float64)
    v = v[~np.isnan(v)]
    return float(v.mean()) if v.size else float("nan")


def _group_key(g: str):
    return (GROUPS.index(g), g) if g in GROUPS else (len(GROUPS), g)


def evaluate(scorer: Scorer, dataset: Sequence[Relation], meta: dict | None = None) -> EvalReport:
    """Per-relation MaxDiff accuracy and Spearman rho, plus unweighted means.

    A relation whose scores are all tied has no defined correlation; it is
    reported as 0 and marked.
    """
    scorer.prepare([p for rel in dataset for p in rel.pairs()])
    results = []
    for rel in dataset:
        scores = {p: scorer.score(rel, p) for p in rel.targets}
        missing = sum(not scorer.covers(p) for p in rel.targets)
        acc = maxdiff_accuracy(scores, rel.questions) if rel.questions else float("nan")
        try:
            rho, defined = spearman(scores, rel.targets), True
        except UndefinedCorrelationError:
            rho, defined = 0.0, False
            log.warning("relation %s: correlation undefined (tied scores)", rel.id)
        results.append(RelationResult(rel.id, rel.group, acc, rho, len(rel.targets), missing, defined))
    return EvalReport(scorer.name, results, scorer.missing_label, dict(meta or {}))
