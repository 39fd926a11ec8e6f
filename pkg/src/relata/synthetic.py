"""Synthetic corpora with planted relations, for experiments and benchmarks.

Every relation owns a head class and a tail class of words whose embeddings
cluster around class centroids, plus a handful of signature patterns that
join its pairs in the corpus. Held-out pairs never occur in the corpus.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from relata.corpus import Pair, TargetPairSet
from relata.embeddings import EmbeddingTable, Vocabulary
from relata.evaluation import Relation


@dataclass
class SyntheticData:
    sentences: list[str]
    table: EmbeddingTable
    pairs: TargetPairSet
    relation_of: dict[Pair, int]
    held_out: set[Pair]
    signatures: list[list[tuple[str, ...]]]
    dataset: list[Relation]

    def seen_pairs(self) -> list[Pair]:
        return [p for p in self.pairs if p not in self.held_out]


def make_synthetic(n_relations: int = 3, pairs_per_relation: int = 20, held_out: int = 5,
                   patterns_per_relation: int = 5, dim: int = 20, sentences_per_pair: int = 30,
                   n_pattern_words: int = 40, n_fillers: int = 60, shared_patterns: int = 3,
                   signature_rate: float = 0.85, centroid_scale: float = 1.0, word_noise: float = 1.0,
                   n_prototypes: int = 3, seed: int = 0) -> SyntheticData:
    rng = np.random.default_rng(seed)
    pattern_words = [f"pw{i}" for i in range(n_pattern_words)]
    fillers = [f"fill{i}" for i in range(n_fillers)]

    def new_pattern(taken):
        while True:
            k = int(rng.integers(1, 4))
            p = tuple(rng.choice(pattern_words, size=k, replace=True).tolist())
            if p not in taken:
                taken.add(p)
                return p

    taken: set = set()
    signatures = [[new_pattern(taken) for _ in range(patterns_per_relation)] for _ in range(n_relations)]
    shared = [new_pattern(taken) for _ in range(shared_patterns)]

    words, vectors = [], []
    relation_of: dict[Pair, int] = {}
    pair_list: list[Pair] = []
    held: set[Pair] = set()
    for r in range(n_relations):
        head_c = rng.normal(scale=centroid_scale, size=dim)
        tail_c = rng.normal(scale=centroid_scale, size=dim)
        for i in range(pairs_per_relation):
            a, b = f"r{r}h{i}", f"r{r}t{i}"
            words += [a, b]
            vectors += [head_c + rng.normal(scale=word_noise, size=dim),
                        tail_c + rng.normal(scale=word_noise, size=dim)]
            pair_list.append((a, b))
            relation_of[(a, b)] = r
            if i >= pairs_per_relation - held_out:
                held.add((a, b))
    for w in pattern_words + fillers:
        words.append(w)
        vectors.append(rng.normal(scale=centroid_scale, size=dim))
    table = EmbeddingTable(Vocabulary(words), np.asarray(vectors, dtype=np.float32))

    sentences = []
    for a, b in pair_list:
        if (a, b) in held:
            continue
        r = relation_of[(a, b)]
        for _ in range(sentences_per_pair):
            if rng.random() < signature_rate:
                k = int(rng.integers(len(signatures[r])))
                pattern = signatures[r][k]
                # the last signature pattern links the pair in reversed order
                left, right = (b, a) if k == len(signatures[r]) - 1 else (a, b)
            else:
                pattern = shared[int(rng.integers(len(shared)))]
                left, right = (a, b) if rng.random() < 0.5 else (b, a)
            pre = rng.choice(fillers, size=int(rng.integers(0, 4))).tolist()
            post = rng.choice(fillers, size=int(rng.integers(0, 4))).tolist()
            sentences.append(" ".join(pre + [left, *pattern, right] + post))
    order = rng.permutation(len(sentences))
    sentences = [sentences[i] for i in order]

    dataset = []
    for r in range(n_relations):
        members = [p for p in pair_list if relation_of[p] == r]
        protos = [p for p in members if p not in held][:n_prototypes]
        targets = {p: float(relation_of[p] == r) for p in pair_list if p not in protos}
        dataset.append(Relation(f"rel{r}", "Synthetic", protos, targets))
    return SyntheticData(sentences, table, TargetPairSet(pair_list), relation_of, held, signatures, dataset)
