"""Knowledge-graph data model: triple parsing, validation, augmentation,
random-order dictionaries, and random subgraph splitting.

Triples are ordered; the order encodes the assembly sequence and is preserved
by every operation in this module.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, UnknownNameError, ValidationError

SELF_LOOP_RELATION = "__self__"
INVERSE_SUFFIX = "__inv"

# Direction tags for augmented triples.
DIR_ORIGINAL = 0
DIR_INVERSE = 1
DIR_SELF = 2


@dataclass(frozen=True)
class KnowledgeGraph:
    """Immutable multi-relational graph with ordered triples."""

    entities: tuple[str, ...]
    relations: tuple[str, ...]
    triples: tuple[tuple[int, int, int], ...]
    graph_id: str = "g"

    def __post_init__(self):
        _check_unique_names(self.entities, "entity")
        _check_unique_names(self.relations, "relation")
        seen: dict[tuple[int, int, int], int] = {}
        for i, (h, r, t) in enumerate(self.triples):
            if not (0 <= h < len(self.entities)) or not (0 <= t < len(self.entities)):
                raise ValidationError(f"triple {i}: entity index out of range: {(h, r, t)}")
            if not (0 <= r < len(self.relations)):
                raise ValidationError(f"triple {i}: relation index out of range: {(h, r, t)}")
            if (h, r, t) in seen:
                raise ValidationError(
                    f"duplicate triple {(h, r, t)} at positions {seen[(h, r, t)]} and {i}"
                )
            seen[(h, r, t)] = i

    @property
    def entity_index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.entities)}

    @property
    def relation_index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.relations)}

    def entity_id(self, name: str) -> int:
        try:
            return self.entity_index[name]
        except KeyError:
            raise UnknownNameError(f"unknown entity {name!r} in graph {self.graph_id!r}") from None

    def relation_id(self, name: str) -> int:
        try:
            return self.relation_index[name]
        except KeyError:
            raise UnknownNameError(f"unknown relation {name!r} in graph {self.graph_id!r}") from None

    def named_triples(self) -> list[tuple[str, str, str]]:
        return [
            (self.entities[h], self.relations[r], self.entities[t]) for h, r, t in self.triples
        ]

    def to_json(self) -> str:
        payload = {
            "graph_id": self.graph_id,
            "entities": list(self.entities),
            "relations": list(self.relations),
            "triples": [list(t) for t in self.triples],
        }
        return json.dumps(payload, ensure_ascii=False, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "KnowledgeGraph":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid graph JSON: {exc}") from None
        try:
            return cls(
                entities=tuple(payload["entities"]),
                relations=tuple(payload["relations"]),
                triples=tuple((int(h), int(r), int(t)) for h, r, t in payload["triples"]),
                graph_id=str(payload["graph_id"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"graph JSON missing or malformed field: {exc}") from None

    def to_tsv(self) -> str:
        lines = [f"{h}\t{r}\t{t}" for h, r, t in self.named_triples()]
        return "\n".join(lines) + ("\n" if lines else "")

    def structurally_equal(self, other: "KnowledgeGraph") -> bool:
        """Equality ignoring graph_id."""
        return (
            self.entities == other.entities
            and self.relations == other.relations
            and self.triples == other.triples
        )


def _check_unique_names(names, kind: str) -> None:
    seen = set()
    for name in names:
        if not name:
            raise ValidationError(f"empty {kind} name")
        if name in seen:
            raise ValidationError(f"duplicate {kind} name {name!r}")
        seen.add(name)


def parse_triples(text: str, graph_id: str = "g") -> KnowledgeGraph:
    """Parse TSV triple content: `head<TAB>relation<TAB>tail`, `#` comments.

    Entities and relations are registered in first-appearance order; triples
    keep file order. Duplicate triples are rejected, naming both lines.
    """
    entities: list[str] = []
    relations: list[str] = []
    ent_ids: dict[str, int] = {}
    rel_ids: dict[str, int] = {}
    triples: list[tuple[int, int, int]] = []
    first_line: dict[tuple[int, int, int], int] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = raw.rstrip("\n").split("\t")
        if len(fields) != 3:
            raise ParseError(f"line {lineno}: expected 3 tab-separated fields, got {len(fields)}")
        head, rel, tail = (f.strip() for f in fields)
        if not head or not rel or not tail:
            raise ParseError(f"line {lineno}: empty field in triple")
        for name in (head, tail):
            if name not in ent_ids:
                ent_ids[name] = len(entities)
                entities.append(name)
        if rel not in rel_ids:
            rel_ids[rel] = len(relations)
            relations.append(rel)
        key = (ent_ids[head], rel_ids[rel], ent_ids[tail])
        if key in first_line:
            raise ValidationError(
                f"duplicate triple at lines {first_line[key]} and {lineno}: "
                f"{head}\t{rel}\t{tail}"
            )
        first_line[key] = lineno
        triples.append(key)

    return KnowledgeGraph(
        entities=tuple(entities),
        relations=tuple(relations),
        triples=tuple(triples),
        graph_id=graph_id,
    )


@dataclass(frozen=True)
class AugmentedGraph:
    """Base graph plus inverse edges and per-entity self-loops.

    aug_relations = base relations, then one inverse per base relation,
    then the self-loop relation. aug_triples = base triples, then inverted
    triples, then one self-loop per entity. Direction tags follow the same
    grouping.
    """

    base: KnowledgeGraph
    aug_relations: tuple[str, ...] = field(init=False)
    aug_triples: tuple[tuple[int, int, int], ...] = field(init=False)
    directions: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        g = self.base
        for name in g.relations:
            if name == SELF_LOOP_RELATION or name.endswith(INVERSE_SUFFIX):
                raise ValidationError(
                    f"relation name {name!r} collides with reserved augmentation names"
                )
        n_rel = len(g.relations)
        aug_relations = (
            g.relations
            + tuple(f"{name}{INVERSE_SUFFIX}" for name in g.relations)
            + (SELF_LOOP_RELATION,)
        )
        originals = list(g.triples)
        inverses = [(t, n_rel + r, h) for h, r, t in g.triples]
        self_rel = 2 * n_rel
        selfs = [(i, self_rel, i) for i in range(len(g.entities))]
        object.__setattr__(self, "aug_relations", aug_relations)
        object.__setattr__(self, "aug_triples", tuple(originals + inverses + selfs))
        object.__setattr__(
            self,
            "directions",
            tuple([DIR_ORIGINAL] * len(originals) + [DIR_INVERSE] * len(inverses) + [DIR_SELF] * len(selfs)),
        )

    @property
    def num_entities(self) -> int:
        return len(self.base.entities)

    @property
    def num_aug_relations(self) -> int:
        return len(self.aug_relations)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(heads, rels, tails, directions) as int arrays, possibly empty."""
        if not self.aug_triples:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty.copy(), empty.copy(), empty.copy()
        arr = np.asarray(self.aug_triples, dtype=np.int64)
        return arr[:, 0], arr[:, 1], arr[:, 2], np.asarray(self.directions, dtype=np.int64)


def augment(g: KnowledgeGraph) -> AugmentedGraph:
    """Add inverse edges and self-loops for the relational convolution."""
    return AugmentedGraph(base=g)


ENTITY = "entity"
RELATION = "relation"


@dataclass(frozen=True)
class OrderedDictionary:
    """Seeded random-order dictionary over a graph's entities and relations.

    `sequence` is a permutation of (kind, name) pairs covering every entity
    and every original relation exactly once.
    """

    sequence: tuple[tuple[str, str], ...]
    seed: int

    def __post_init__(self):
        if len(set(self.sequence)) != len(self.sequence):
            raise ValidationError("dictionary sequence contains duplicates")

    @property
    def m(self) -> int:
        return len(self.sequence)

    @property
    def positions(self) -> dict[tuple[str, str], int]:
        return {sym: i for i, sym in enumerate(self.sequence)}

    def position_of_entity(self, name: str) -> int:
        try:
            return self.positions[(ENTITY, name)]
        except KeyError:
            raise UnknownNameError(f"entity {name!r} not in dictionary") from None

    def position_of_relation(self, name: str) -> int:
        try:
            return self.positions[(RELATION, name)]
        except KeyError:
            raise UnknownNameError(f"relation {name!r} not in dictionary") from None

    def matches(self, g: KnowledgeGraph) -> bool:
        want = {(ENTITY, e) for e in g.entities} | {(RELATION, r) for r in g.relations}
        return want == set(self.sequence)

    def order_hash(self) -> str:
        import hashlib

        joined = "\x1f".join(f"{kind}:{name}" for kind, name in self.sequence)
        return hashlib.sha256(joined.encode("utf-8")).hexdigest()


def build_dictionary(g: KnowledgeGraph, seed: int) -> OrderedDictionary:
    """Permute entities-then-relations with a seeded RNG."""
    symbols = [(ENTITY, e) for e in g.entities] + [(RELATION, r) for r in g.relations]
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(symbols))
    return OrderedDictionary(sequence=tuple(symbols[i] for i in order), seed=seed)


def split_random_subgraphs(
    g: KnowledgeGraph, count: int, min_triples: int, seed: int
) -> list[KnowledgeGraph]:
    """Sample `count` connected subgraphs of at least `min_triples` triples.

    Each subgraph grows by a seeded walk: starting from a random head entity,
    triples incident to the collected entity set are added in file order until
    the size target is met; if a component is exhausted the walk jumps to a
    fresh random entity. Selected triples keep their original file order.
    """
    if count < 1:
        raise ValidationError("count must be >= 1")
    if min_triples < 1:
        raise ValidationError("min_triples must be >= 1")
    if min_triples > len(g.triples):
        raise ValidationError(
            f"min_triples={min_triples} exceeds triple count {len(g.triples)}"
        )
    rng = np.random.default_rng(seed)
    heads = sorted({h for h, _, _ in g.triples})
    out: list[KnowledgeGraph] = []
    for k in range(count):
        chosen: set[int] = set()
        entity_set: set[int] = set()
        entity_set.add(heads[int(rng.integers(len(heads)))])
        while len(chosen) < min_triples:
            progress = False
            for i, (h, r, t) in enumerate(g.triples):
                if i in chosen:
                    continue
                if h in entity_set or t in entity_set:
                    chosen.add(i)
                    entity_set.add(h)
                    entity_set.add(t)
                    progress = True
                    if len(chosen) >= min_triples:
                        break
            if len(chosen) >= min_triples:
                break
            if not progress:
                # Disconnected remainder: jump to a fresh component.
                remaining = sorted(
                    {h for i, (h, _, _) in enumerate(g.triples) if i not in chosen}
                )
                entity_set.add(remaining[int(rng.integers(len(remaining)))])
        out.append(_induced_subgraph(g, sorted(chosen), f"{g.graph_id}-sub{k}"))
    return out


def _induced_subgraph(g: KnowledgeGraph, triple_ids: list[int], graph_id: str) -> KnowledgeGraph:
    entities: list[str] = []
    relations: list[str] = []
    ent_ids: dict[str, int] = {}
    rel_ids: dict[str, int] = {}
    triples: list[tuple[int, int, int]] = []
    for i in triple_ids:
        h, r, t = g.triples[i]
        for name in (g.entities[h], g.entities[t]):
            if name not in ent_ids:
                ent_ids[name] = len(entities)
                entities.append(name)
        rname = g.relations[r]
        if rname not in rel_ids:
            rel_ids[rname] = len(relations)
            relations.append(rname)
        triples.append((ent_ids[g.entities[h]], rel_ids[rname], ent_ids[g.entities[t]]))
    return KnowledgeGraph(
        entities=tuple(entities),
        relations=tuple(relations),
        triples=tuple(triples),
        graph_id=graph_id,
    )
