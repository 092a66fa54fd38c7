"""Synthetic assembly graphs for tests, demos, and the generalization harness.

Graphs follow the step/operation schema the default template bank expects:
(product has_step stepK), then per step one has_action edge, an ordered mix of
acts_on/uses_tool edges, one acts_to, one has_detail, and optionally produces.
Entity names are multi-word on purpose; reuse across steps is what makes the
text-triple serialization redundant compared to one token per graph symbol.
"""

from __future__ import annotations

import numpy as np

from .kg import KnowledgeGraph, parse_triples

ACTIONS = (
    "tighten firmly",
    "insert and seat",
    "align to datum",
    "press fit gently",
    "torque to spec",
    "inspect visually",
)

TOOLS = (
    "hex wrench 5 mm",
    "torque screwdriver",
    "needle nose pliers",
    "rubber mallet soft face",
    "socket wrench 10 mm",
    "calibrated feeler gauge",
)

PARTS = (
    "valve body casting",
    "spring seat washer",
    "adjustment spring coil",
    "diaphragm plate steel",
    "bonnet cap machined",
    "relief port plug",
    "locking nut brass",
    "inlet filter mesh",
    "outlet gasket ring",
    "piston sleeve hardened",
    "retaining clip spring",
    "orifice disc brass",
)

WORKSPACES = (
    "assembly bench left",
    "vise station two",
    "inspection table main",
    "fixture plate alpha",
)

ATTRIBUTES = (
    "brass finish polished",
    "anodized surface blue",
    "weight forty grams",
    "hardened to spec",
)

SUBASSEMBLIES = (
    "valve cartridge unit",
    "bonnet spring stack",
    "inlet filter module",
)


def make_assembly_graph(
    graph_id: str,
    num_steps: int,
    seed: int,
    parts_per_step: tuple[int, int] = (1, 3),
    attribute_parts: int = 2,
    subassembly_every: int = 2,
) -> KnowledgeGraph:
    """Seeded product graph with `num_steps` steps in assembly order."""
    rng = np.random.default_rng(seed)
    product = f"{graph_id.upper()} pressure reducing valve"
    lines: list[str] = []
    part_pool = list(PARTS)
    used_parts: list[str] = []
    for k in range(1, num_steps + 1):
        step = f"assembly step {k}"
        lines.append(f"{product}\thas_step\t{step}")
        lines.append(f"{step}\thas_action\t{ACTIONS[int(rng.integers(len(ACTIONS)))]}")
        n_parts = int(rng.integers(parts_per_step[0], parts_per_step[1] + 1))
        tool = TOOLS[int(rng.integers(len(TOOLS)))]
        tool_pos = int(rng.integers(n_parts + 1))
        objects: list[tuple[str, str]] = []
        for _ in range(n_parts):
            part = part_pool[int(rng.integers(len(part_pool)))]
            # No repeated (step, acts_on, part) edge: pick until fresh.
            while any(o == part for _, o in objects):
                part = part_pool[int(rng.integers(len(part_pool)))]
            objects.append(("acts_on", part))
            if part not in used_parts:
                used_parts.append(part)
        objects.insert(tool_pos, ("uses_tool", tool))
        for rel, obj in objects:
            lines.append(f"{step}\t{rel}\t{obj}")
        lines.append(f"{step}\tacts_to\t{WORKSPACES[int(rng.integers(len(WORKSPACES)))]}")
        lines.append(f"{step}\thas_detail\tdetail note {k} for {graph_id}")
        if subassembly_every and k % subassembly_every == 0:
            sub = SUBASSEMBLIES[(k // subassembly_every - 1) % len(SUBASSEMBLIES)]
            lines.append(f"{step}\tproduces\t{sub}")
    chosen = list(used_parts)
    rng.shuffle(chosen)
    for part in chosen[:attribute_parts]:
        attr = ATTRIBUTES[int(rng.integers(len(ATTRIBUTES)))]
        lines.append(f"{part}\thas_attribute\t{attr}")
    return parse_triples("\n".join(lines) + "\n", graph_id=graph_id)


def make_random_graph(seed: int, level: str = "step") -> KnowledgeGraph:
    """Random graph for the generalization harness.

    `step` level randomizes the step count; `operation` level also widens the
    per-step operation mix.
    """
    rng = np.random.default_rng(seed)
    if level == "step":
        num_steps = int(rng.integers(3, 8))
        parts = (1, 2)
    elif level == "operation":
        num_steps = int(rng.integers(2, 6))
        parts = (1, 4)
    else:
        raise ValueError(f"unknown level {level!r}")
    return make_assembly_graph(
        graph_id=f"rand-{level}-{seed}",
        num_steps=num_steps,
        seed=int(rng.integers(2**31)),
        parts_per_step=parts,
    )


def cv01s_graph() -> KnowledgeGraph:
    """Small fixed graph named like the worked examples in the docs."""
    tsv = "\n".join(
        [
            "CV01S\thas_step\tstep1",
            "step1\thas_action\ttighten firmly",
            "step1\tacts_on\tvalve body casting",
            "step1\tuses_tool\thex wrench 5 mm",
            "step1\tacts_on\tbonnet cap machined",
            "step1\tacts_to\tassembly bench left",
            "step1\thas_detail\ttorque to twelve newton metres",
            "CV01S\thas_step\tstep2",
            "step2\thas_action\tinsert and seat",
            "step2\tacts_on\tadjustment spring coil",
            "step2\tuses_tool\tneedle nose pliers",
            "step2\tacts_to\tvise station two",
            "step2\thas_detail\tcheck spring preload",
            "step2\tproduces\tbonnet spring stack",
            "valve body casting\thas_attribute\tbrass finish polished",
        ]
    )
    return parse_triples(tsv + "\n", graph_id="CV01S")
