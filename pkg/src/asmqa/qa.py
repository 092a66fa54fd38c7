"""Template QA: traversal oracles over graph triples, dataset generation,
instruction rendering, and template-based question parsing.

Gold answers are entity-name sequences read off the triple order, so every
generated pair can be re-derived (and checked) from the graph alone.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, UnknownNameError, ValidationError
from .kg import KnowledgeGraph

CATEGORIES = (
    "action",
    "tools",
    "workspace",
    "detail",
    "parts_sequence",
    "attributes",
    "subassembly",
    "assembly",
)

KG_START = "<kg_start_token>"
KG_END = "</kg_end_token>"
GRAPH_PLACEHOLDER = "{GRAPH}"

_SLOT_RE = re.compile(r"\{(\w+)\}")


@dataclass(frozen=True)
class QAPair:
    question: str
    category: str
    hops: int
    anchor: str
    answer: tuple[str, ...]
    graph_id: str
    template_id: str

    def __post_init__(self):
        if not self.question:
            raise ValidationError("empty question")
        if self.category not in CATEGORIES:
            raise ValidationError(f"unknown category {self.category!r}")
        if not self.answer:
            raise ValidationError("empty gold answer")
        if self.hops == 1 and len(self.answer) != 1:
            raise ValidationError("single-hop answer must have exactly one element")
        if self.hops < 1:
            raise ValidationError("hops must be >= 1")


@dataclass(frozen=True)
class QuestionTemplate:
    """Surface pattern with slots, bound to a relation or traversal program.

    `anchor_slot` names the slot holding the traversal start entity. A
    `{product}` slot, when present and not the anchor, is resolved through
    `product_relation` (the step's parent, or the graph's product).
    """

    template_id: str
    category: str
    pattern: str
    anchor_slot: str
    relation: str | None = None
    program: str | None = None
    hops: int = 1
    product_relation: str = "has_step"

    def __post_init__(self):
        slots = _SLOT_RE.findall(self.pattern)
        if len(slots) != len(set(slots)):
            raise ValidationError(f"template {self.template_id}: repeated slot in pattern")
        if self.anchor_slot not in slots:
            raise ValidationError(
                f"template {self.template_id}: anchor slot {self.anchor_slot!r} not in pattern"
            )
        if (self.relation is None) == (self.program is None):
            raise ValidationError(
                f"template {self.template_id}: exactly one of relation/program required"
            )

    @property
    def slots(self) -> tuple[str, ...]:
        return tuple(_SLOT_RE.findall(self.pattern))

    def instantiate(self, bindings: dict[str, str]) -> str:
        missing = [s for s in self.slots if s not in bindings]
        if missing:
            raise ValidationError(f"template {self.template_id}: unbound slots {missing}")
        text = self.pattern
        for slot in self.slots:
            text = text.replace("{" + slot + "}", bindings[slot])
        return text

    @property
    def question_key(self) -> str:
        """Name under which the question head embeds this template's target."""
        return self.relation if self.relation is not None else self.program


@dataclass(frozen=True)
class ParsedQuestion:
    template_id: str
    category: str
    anchor: str
    bindings: dict[str, str] = field(hash=False)
    relation: str | None = None
    program: str | None = None

    @property
    def question_key(self) -> str:
        return self.relation if self.relation is not None else self.program


@dataclass(frozen=True)
class TraversalProgram:
    """Ordered collection rule for multi-hop answers.

    `step_objects` gathers tails of `relations` edges from the anchor in
    triple order. `product_objects` does that for every step of the anchor
    product (steps in triple order of `step_relation` edges).
    """

    name: str
    kind: str
    relations: tuple[str, ...] = ("acts_on", "uses_tool")
    step_relation: str = "has_step"

    def __post_init__(self):
        if self.kind not in ("step_objects", "product_objects"):
            raise ValidationError(f"unknown program kind {self.kind!r}")


PROGRAMS: dict[str, TraversalProgram] = {
    "parts_and_tools": TraversalProgram("parts_and_tools", "step_objects"),
    "assembly_sequence": TraversalProgram("assembly_sequence", "product_objects"),
}


def traverse_single_hop(g: KnowledgeGraph, anchor: str, relation: str) -> list[str]:
    """Tails of (anchor, relation, ·) triples in triple order."""
    h = g.entity_id(anchor)
    r = g.relation_id(relation)
    return [g.entities[t] for hh, rr, t in g.triples if hh == h and rr == r]


def traverse_multi_hop(g: KnowledgeGraph, anchor: str, program: str) -> list[str]:
    """Ordered object sequence per the named program; duplicates kept."""
    try:
        prog = PROGRAMS[program]
    except KeyError:
        raise UnknownNameError(f"unknown traversal program {program!r}") from None
    g.entity_id(anchor)
    if prog.kind == "step_objects":
        return _step_objects(g, anchor, prog.relations)
    steps = (
        traverse_single_hop(g, anchor, prog.step_relation)
        if prog.step_relation in g.relation_index
        else []
    )
    out: list[str] = []
    for step in steps:
        out.extend(_step_objects(g, step, prog.relations))
    return out


def _step_objects(g: KnowledgeGraph, step: str, relations: tuple[str, ...]) -> list[str]:
    h = g.entity_id(step)
    rel_ids = {g.relation_index[r] for r in relations if r in g.relation_index}
    return [g.entities[t] for hh, rr, t in g.triples if hh == h and rr in rel_ids]


def oracle_answer(g: KnowledgeGraph, template: QuestionTemplate, anchor: str) -> list[str]:
    if template.relation is not None:
        if template.relation not in g.relation_index:
            return []
        return traverse_single_hop(g, anchor, template.relation)
    return traverse_multi_hop(g, anchor, template.program)


def _graph_product(g: KnowledgeGraph, product_relation: str) -> str | None:
    if product_relation not in g.relation_index:
        return None
    r = g.relation_index[product_relation]
    for h, rr, _ in g.triples:
        if rr == r:
            return g.entities[h]
    return None


def _anchor_candidates(
    g: KnowledgeGraph, template: QuestionTemplate
) -> list[tuple[str, dict[str, str]]]:
    """(anchor, bindings) pairs in deterministic graph order."""
    slots = template.slots
    needs_product = "product" in slots and template.anchor_slot != "product"
    prel = template.product_relation
    if template.anchor_slot == "step":
        if prel not in g.relation_index:
            return []
        r = g.relation_index[prel]
        seen: set[str] = set()
        out = []
        for h, rr, t in g.triples:
            if rr != r:
                continue
            step = g.entities[t]
            if step in seen:
                continue
            seen.add(step)
            bindings = {template.anchor_slot: step}
            if needs_product:
                bindings["product"] = g.entities[h]
            out.append((step, bindings))
        return out
    if template.anchor_slot == "product":
        if prel not in g.relation_index:
            return []
        r = g.relation_index[prel]
        seen = set()
        out = []
        for h, rr, _ in g.triples:
            if rr != r or g.entities[h] in seen:
                continue
            seen.add(g.entities[h])
            out.append((g.entities[h], {"product": g.entities[h]}))
        return out
    # Generic entity anchor: every entity, product bound to the graph product.
    product = _graph_product(g, prel)
    if needs_product and product is None:
        return []
    out = []
    for name in g.entities:
        bindings = {template.anchor_slot: name}
        if needs_product:
            bindings["product"] = product
        out.append((name, bindings))
    return out


def generate_dataset(
    graphs: list[KnowledgeGraph], templates: list[QuestionTemplate], seed: int
) -> list[QAPair]:
    """One QAPair per (graph, anchor, paraphrase) with a usable oracle answer.

    Single-hop templates emit only where the relation is functional at the
    anchor (exactly one tail); multi-hop templates emit any non-empty
    sequence. The seed controls the final shuffle only.
    """
    if not templates:
        raise ConfigError("no templates given")
    for template in templates:
        names = (
            (template.relation,)
            if template.relation is not None
            else PROGRAMS[template.program].relations
        )
        if not any(any(n in g.relation_index for n in names) for g in graphs):
            raise ConfigError(
                f"template {template.template_id}: relation/program "
                f"{template.question_key!r} unknown in every graph"
            )
    pairs: list[QAPair] = []
    for g in graphs:
        for template in templates:
            for anchor, bindings in _anchor_candidates(g, template):
                answer = oracle_answer(g, template, anchor)
                if not answer:
                    continue
                if template.hops == 1 and len(answer) != 1:
                    continue
                pairs.append(
                    QAPair(
                        question=template.instantiate(bindings),
                        category=template.category,
                        hops=template.hops,
                        anchor=anchor,
                        answer=tuple(answer),
                        graph_id=g.graph_id,
                        template_id=template.template_id,
                    )
                )
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(pairs))
    return [pairs[i] for i in order]


def render_instruction(qa: QAPair) -> str:
    """Instruction text with kg token markers; {GRAPH} stays a placeholder."""
    return (
        f"{KG_START}{GRAPH_PLACEHOLDER}{KG_END}\n"
        "# Task: Based on the assembly knowledge graph information above, "
        "answer the question\n"
        f"# Question {qa.question}"
    )


def _normalize(text: str) -> str:
    text = re.sub(r"\s+", " ", text).strip()
    return re.sub(r"\s+([?.!,])", r"\1", text)


def _edit_distance(a: str, b: str) -> int:
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def _pattern_regex(template: QuestionTemplate) -> re.Pattern:
    parts = []
    pos = 0
    for match in _SLOT_RE.finditer(template.pattern):
        parts.append(re.escape(_normalize(template.pattern[pos : match.start()])))
        parts.append(f"(?P<{match.group(1)}>.+?)")
        pos = match.end()
    parts.append(re.escape(_normalize(template.pattern[pos:])))
    return re.compile("".join(parts) + r"\Z")


def _literal_length(template: QuestionTemplate) -> int:
    return len(_SLOT_RE.sub("", template.pattern))


def parse_question(
    text: str, templates: list[QuestionTemplate], g: KnowledgeGraph
) -> ParsedQuestion:
    """Longest-literal-match template whose slots bind to entities of `g`."""
    if not templates:
        raise ConfigError("no templates registered")
    normalized = _normalize(text)
    ranked = sorted(
        enumerate(templates), key=lambda it: (-_literal_length(it[1]), it[0])
    )
    for _, template in ranked:
        match = _pattern_regex(template).match(normalized)
        if match is None:
            continue
        bindings = {k: v.strip() for k, v in match.groupdict().items()}
        if any(name not in g.entity_index for name in bindings.values()):
            continue
        return ParsedQuestion(
            template_id=template.template_id,
            category=template.category,
            anchor=bindings[template.anchor_slot],
            bindings=bindings,
            relation=template.relation,
            program=template.program,
        )
    nearest = min(
        templates, key=lambda t: _edit_distance(normalized, _normalize(t.pattern))
    )
    raise UnknownNameError(
        f"unrecognized question {text!r}; nearest template: "
        f"{nearest.pattern!r} ({nearest.template_id})"
    )


def question_from_pair(qa: QAPair, templates: list[QuestionTemplate]) -> ParsedQuestion:
    """ParsedQuestion for a generated pair, bypassing surface-text parsing."""
    by_id = {t.template_id: t for t in templates}
    try:
        template = by_id[qa.template_id]
    except KeyError:
        raise UnknownNameError(f"unknown template id {qa.template_id!r}") from None
    return ParsedQuestion(
        template_id=qa.template_id,
        category=qa.category,
        anchor=qa.anchor,
        bindings={template.anchor_slot: qa.anchor},
        relation=template.relation,
        program=template.program,
    )


def default_templates() -> list[QuestionTemplate]:
    """Built-in bank: three paraphrases per category."""
    single = {
        "action": (
            "has_action",
            [
                "What action is performed in {step} of the {product}?",
                "What action is done by {step} of the {product}?",
                "What action does {step} of the {product} carry out?",
            ],
        ),
        "tools": (
            "uses_tool",
            [
                "What tool is used in {step} of the {product}?",
                "Which tool is utilized by {step} of the {product}?",
                "Can you name the tools used by {step} of the {product}?",
            ],
        ),
        "workspace": (
            "acts_to",
            [
                "To what position does {step} of the {product} act?",
                "Where does {step} of the {product} act to?",
                "To which location does {step} of the {product} act?",
            ],
        ),
        "detail": (
            "has_detail",
            [
                "What detail does {step} of the {product} provide?",
                "What detail is given for {step} of the {product}?",
                "What detail is associated with {step} of the {product}?",
            ],
        ),
        "subassembly": (
            "produces",
            [
                "What subassembly does {step} of the {product} produce?",
                "Which subassembly results from {step} of the {product}?",
                "What does {step} of the {product} assemble into?",
            ],
        ),
    }
    out: list[QuestionTemplate] = []
    for category, (relation, patterns) in single.items():
        for i, pattern in enumerate(patterns):
            out.append(
                QuestionTemplate(
                    template_id=f"{category}_{i}",
                    category=category,
                    pattern=pattern,
                    anchor_slot="step",
                    relation=relation,
                )
            )
    for i, pattern in enumerate(
        [
            "What attribute does the {entity} of the {product} have?",
            "Which attribute is recorded for the {entity} of the {product}?",
            "Can you give the attribute of the {entity} of the {product}?",
        ]
    ):
        out.append(
            QuestionTemplate(
                template_id=f"attributes_{i}",
                category="attributes",
                pattern=pattern,
                anchor_slot="entity",
                relation="has_attribute",
            )
        )
    for i, pattern in enumerate(
        [
            "List the parts and tools used in {step} of the {product}, in the order they are used.",
            "In {step} of the {product}, what are the parts and tools involved sequentially?",
            "Identify the sequential parts and tools used in {step} of the {product}.",
        ]
    ):
        out.append(
            QuestionTemplate(
                template_id=f"parts_sequence_{i}",
                category="parts_sequence",
                pattern=pattern,
                anchor_slot="step",
                program="parts_and_tools",
                hops=2,
            )
        )
    for i, pattern in enumerate(
        [
            "List all parts and tools used to assemble the {product}, in the order they are used.",
            "What is the full sequence of parts and tools for assembling the {product}?",
            "Identify the complete part and tool sequence for the {product}.",
        ]
    ):
        out.append(
            QuestionTemplate(
                template_id=f"assembly_{i}",
                category="assembly",
                pattern=pattern,
                anchor_slot="product",
                program="assembly_sequence",
                hops=3,
            )
        )
    return out


def write_dataset(pairs: list[QAPair], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for qa in pairs:
            fh.write(dataset_line(qa) + "\n")


def dataset_line(qa: QAPair) -> str:
    return json.dumps(
        {
            "question": qa.question,
            "category": qa.category,
            "hops": qa.hops,
            "anchor": qa.anchor,
            "answer": list(qa.answer),
            "graph_id": qa.graph_id,
            "template_id": qa.template_id,
        },
        ensure_ascii=False,
    )


def read_dataset(path) -> list[QAPair]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                out.append(
                    QAPair(
                        question=row["question"],
                        category=row["category"],
                        hops=int(row["hops"]),
                        anchor=row["anchor"],
                        answer=tuple(row["answer"]),
                        graph_id=row["graph_id"],
                        template_id=row["template_id"],
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValidationError(f"dataset line {lineno}: {exc}") from None
    return out


def template_bank_to_json(templates: list[QuestionTemplate]) -> str:
    return json.dumps(
        [
            {
                "template_id": t.template_id,
                "category": t.category,
                "pattern": t.pattern,
                "anchor_slot": t.anchor_slot,
                "relation": t.relation,
                "program": t.program,
                "hops": t.hops,
                "product_relation": t.product_relation,
            }
            for t in templates
        ],
        ensure_ascii=False,
        indent=2,
    )


def template_bank_from_json(text: str) -> list[QuestionTemplate]:
    try:
        rows = json.loads(text)
        return [QuestionTemplate(**row) for row in rows]
    except (json.JSONDecodeError, TypeError) as exc:
        raise ValidationError(f"bad template bank: {exc}") from None
