"""Projector alignment of structural and semantic embeddings into graph
tokens, a trainable attention QA head over those tokens, the capped top-k
sparsity loss, training, greedy decoding, and evaluation.

Gradients through the attention head, the projector softmax rows, and the
loss cap are derived by hand and verified against finite differences in the
test suite.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import TrainingError, UnknownNameError, ValidationError
from .kg import RELATION, KnowledgeGraph, OrderedDictionary
from .metrics import exact_match, nlcs, wjaccard
from .qa import CATEGORIES, PROGRAMS, ParsedQuestion, QAPair, QuestionTemplate, question_from_pair

STOP = "<STOP>"


# ---------------------------------------------------------------------------
# Graph token construction


@dataclass
class GraphContext:
    """Frozen per-graph inputs of the alignment stage."""

    graph: KnowledgeGraph
    dictionary: OrderedDictionary
    e_struct: np.ndarray
    e_sem: np.ndarray

    def __post_init__(self):
        m = self.dictionary.m
        if self.e_struct.shape[0] != m or self.e_sem.shape[0] != m:
            raise ValidationError("embedding row count does not match dictionary")
        if not self.dictionary.matches(self.graph):
            raise ValidationError("dictionary does not match graph")


@dataclass
class GraphTokens:
    """Projected graph tokens plus the dictionary that orders the rows."""

    rows: np.ndarray
    dictionary: OrderedDictionary

    def relation_row_indices(self) -> np.ndarray:
        return np.array(
            [i for i, (kind, _) in enumerate(self.dictionary.sequence) if kind == RELATION],
            dtype=np.int64,
        )

    def with_zeroed_relation_rows(self) -> "GraphTokens":
        rows = self.rows.copy()
        rows[self.relation_row_indices()] = 0.0
        return GraphTokens(rows=rows, dictionary=self.dictionary)


@dataclass
class AlignmentParams:
    """Projector weights, question embeddings, attention maps, output map."""

    struct_w1: np.ndarray
    struct_b1: np.ndarray
    struct_w2: np.ndarray
    struct_b2: np.ndarray
    sem_w1: np.ndarray
    sem_b1: np.ndarray
    sem_w2: np.ndarray
    sem_b2: np.ndarray
    cat_emb: np.ndarray
    key_emb: np.ndarray
    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    w_out: np.ndarray
    b_out: np.ndarray
    vocab: tuple[str, ...]
    categories: tuple[str, ...]
    keys: tuple[str, ...]

    def __post_init__(self):
        if self.d_prime % 2 != 0:
            raise ValidationError("d_prime must be even")
        if self.w_out.shape[1] != len(self.vocab) + 1:
            raise ValidationError("output map does not cover vocab plus STOP")

    @property
    def d_prime(self) -> int:
        return self.w_q.shape[0]

    @property
    def stop_id(self) -> int:
        return len(self.vocab)

    def vocab_id(self, name: str) -> int:
        try:
            return self.vocab.index(name)
        except ValueError:
            raise UnknownNameError(f"entity {name!r} not in answer vocabulary") from None

    def tensors(self) -> dict[str, np.ndarray]:
        return {
            "struct_w1": self.struct_w1,
            "struct_b1": self.struct_b1,
            "struct_w2": self.struct_w2,
            "struct_b2": self.struct_b2,
            "sem_w1": self.sem_w1,
            "sem_b1": self.sem_b1,
            "sem_w2": self.sem_w2,
            "sem_b2": self.sem_b2,
            "cat_emb": self.cat_emb,
            "key_emb": self.key_emb,
            "w_q": self.w_q,
            "w_k": self.w_k,
            "w_v": self.w_v,
            "w_out": self.w_out,
            "b_out": self.b_out,
        }

    def copy(self) -> "AlignmentParams":
        kwargs = {name: tensor.copy() for name, tensor in self.tensors().items()}
        return AlignmentParams(
            **kwargs, vocab=self.vocab, categories=self.categories, keys=self.keys
        )


def init_alignment_params(
    vocab: tuple[str, ...],
    categories: tuple[str, ...],
    keys: tuple[str, ...],
    d_in: int = 768,
    d_prime: int = 256,
    seed: int = 0,
) -> AlignmentParams:
    rng = np.random.default_rng(seed)
    half = d_prime // 2

    def xavier(a: int, b: int) -> np.ndarray:
        bound = np.sqrt(6.0 / (a + b))
        return rng.uniform(-bound, bound, size=(a, b))

    return AlignmentParams(
        struct_w1=xavier(d_in, d_prime),
        struct_b1=np.zeros(d_prime),
        struct_w2=xavier(d_prime, half),
        struct_b2=np.zeros(half),
        sem_w1=xavier(d_in, d_prime),
        sem_b1=np.zeros(d_prime),
        sem_w2=xavier(d_prime, half),
        sem_b2=np.zeros(half),
        cat_emb=rng.uniform(-0.1, 0.1, size=(len(categories), d_prime)),
        key_emb=rng.uniform(-0.1, 0.1, size=(len(keys), d_prime)),
        w_q=xavier(d_prime, d_prime),
        w_k=xavier(d_prime, d_prime),
        w_v=xavier(d_prime, d_prime),
        w_out=xavier(d_prime, len(vocab) + 1),
        b_out=np.zeros(len(vocab) + 1),
        vocab=tuple(vocab),
        categories=tuple(categories),
        keys=tuple(keys),
    )


def _softmax_rows(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _softmax_rows_backward(s: np.ndarray, ds: np.ndarray) -> np.ndarray:
    return s * (ds - np.sum(s * ds, axis=-1, keepdims=True))


def project(e: np.ndarray, which: str, params: AlignmentParams) -> np.ndarray:
    """Two-layer projector with tanh between layers, then row softmax.

    Every output row is strictly positive and sums to 1.
    """
    if which == "struct":
        w1, b1, w2, b2 = params.struct_w1, params.struct_b1, params.struct_w2, params.struct_b2
    elif which == "sem":
        w1, b1, w2, b2 = params.sem_w1, params.sem_b1, params.sem_w2, params.sem_b2
    else:
        raise ValidationError(f"unknown projector {which!r}")
    if e.ndim != 2 or e.shape[1] != w1.shape[0]:
        raise ValidationError(f"projector input shape {e.shape} does not match {w1.shape[0]}")
    h1 = np.tanh(e @ w1 + b1)
    return _softmax_rows(h1 @ w2 + b2)


def fuse(s: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Row-wise concatenation, structural half first."""
    if s.shape[0] != m.shape[0]:
        raise ValidationError(f"fuse: row mismatch {s.shape[0]} vs {m.shape[0]}")
    return np.concatenate([s, m], axis=1)


def build_graph_tokens(ctx: GraphContext, params: AlignmentParams) -> GraphTokens:
    """E_G for one graph: project both matrices and concatenate."""
    for name in ctx.graph.entities:
        if name not in params.vocab:
            raise ValidationError(f"vocabulary does not cover entity {name!r}")
    rows = fuse(project(ctx.e_struct, "struct", params), project(ctx.e_sem, "sem", params))
    return GraphTokens(rows=rows, dictionary=ctx.dictionary)


# ---------------------------------------------------------------------------
# Question resolution


def _question_indices(
    params: AlignmentParams, tokens: GraphTokens, question: ParsedQuestion
) -> tuple[int, int, list[int]]:
    """(category index, key index, dictionary rows of the question's relations)."""
    try:
        ci = params.categories.index(question.category)
    except ValueError:
        raise UnknownNameError(f"unknown question category {question.category!r}") from None
    key = question.question_key
    try:
        ki = params.keys.index(key)
    except ValueError:
        raise UnknownNameError(f"unknown question relation/program {key!r}") from None
    if question.relation is not None:
        rel_names = [question.relation]
    else:
        rel_names = list(PROGRAMS[question.program].relations)
    positions = tokens.dictionary.positions
    rel_rows = [positions[(RELATION, r)] for r in rel_names if (RELATION, r) in positions]
    return ci, ki, rel_rows


def _context_rows(tokens: GraphTokens, anchor: str, prefix: list[str]) -> list[int]:
    positions = tokens.dictionary.positions
    rows = []
    for name in [anchor] + list(prefix):
        pos = positions.get((ENTITY, name))
        if pos is not None:
            rows.append(pos)
    return rows


def qa_forward(
    tokens: GraphTokens,
    question: ParsedQuestion,
    prefix: list[str],
    params: AlignmentParams,
) -> np.ndarray:
    """Logits over the answer vocabulary plus STOP for one decode step.

    The query sums the category embedding, the question's relation
    representation (its learned vector plus the relation token rows), and the
    mean of the anchor and already-decoded entity token rows.
    """
    logits, _ = _steps_forward(tokens, question, [list(prefix)], params)
    return logits[0]


def _steps_forward(
    tokens: GraphTokens,
    question: ParsedQuestion,
    prefixes: list[list[str]],
    params: AlignmentParams,
):
    """Shared forward over several decode steps of one question."""
    ci, ki, rel_rows = _question_indices(params, tokens, question)
    e_g = tokens.rows
    d_prime = params.d_prime
    if e_g.shape[1] != d_prime:
        raise ValidationError(f"graph tokens have width {e_g.shape[1]}, expected {d_prime}")
    steps = len(prefixes)
    qbase = np.tile(params.cat_emb[ci] + params.key_emb[ki], (steps, 1))
    if rel_rows:
        qbase += e_g[rel_rows].mean(axis=0)
    ctx_rows = [_context_rows(tokens, question.anchor, p) for p in prefixes]
    for t, rows in enumerate(ctx_rows):
        if rows:
            qbase[t] += e_g[rows].mean(axis=0)
    q = qbase @ params.w_q
    k = e_g @ params.w_k
    v = e_g @ params.w_v
    scores = q @ k.T / np.sqrt(d_prime)
    alpha = _softmax_rows(scores)
    attended = alpha @ v
    logits = attended @ params.w_out + params.b_out
    cache = {
        "ci": ci,
        "ki": ki,
        "rel_rows": rel_rows,
        "ctx_rows": ctx_rows,
        "qbase": qbase,
        "q": q,
        "k": k,
        "v": v,
        "alpha": alpha,
        "attended": attended,
        "logits": logits,
    }
    return logits, cache


# ---------------------------------------------------------------------------
# Loss pieces (Eq. 9 / Eq. 10 shapes)


@dataclass
class AlignTrainCfg:
    lr: float = 1e-4
    epochs: int = 100
    lambda_penalty: float = 1e-5
    top_k: int = 10
    max_ratio: float = 0.1
    seed: int = 0
    d_prime: int = 256
    weight_decay: float = 0.0
    penalty_enabled: bool = True
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.lr <= 0 or self.epochs < 0 or self.top_k < 1:
            raise ValidationError("lr must be > 0, epochs >= 0, top_k >= 1")
        if self.lambda_penalty < 0:
            raise ValidationError("lambda_penalty must be >= 0")
        if not (0.0 < self.max_ratio < 1.0):
            raise ValidationError("max_ratio must be in (0, 1)")
        if self.d_prime % 2 != 0:
            raise ValidationError("d_prime must be even")


def topk_penalty(logit_rows: np.ndarray, cfg: AlignTrainCfg) -> float:
    """Mean over rows of the sum of squared top-k logits, scaled by lambda."""
    logit_rows = np.atleast_2d(np.asarray(logit_rows, dtype=np.float64))
    n, v = logit_rows.shape
    if n < 1:
        raise ValidationError("penalty needs at least one logit row")
    if cfg.top_k > v:
        raise ValidationError(f"top_k={cfg.top_k} exceeds vocabulary size {v}")
    top = np.partition(logit_rows, v - cfg.top_k, axis=1)[:, v - cfg.top_k :]
    return float(cfg.lambda_penalty / n * np.sum(top**2))


def total_loss(l_ce: float, l_pen: float, max_ratio: float) -> float:
    """Cross-entropy plus the penalty capped at a fraction of it."""
    if l_ce < 0 or l_pen < 0:
        raise ValidationError("loss terms must be non-negative")
    return l_ce + min(l_pen, l_ce * max_ratio)


def _example_loss(
    tokens: GraphTokens,
    question: ParsedQuestion,
    gold: tuple[str, ...],
    params: AlignmentParams,
    cfg: AlignTrainCfg,
):
    """Teacher-forced loss over the gold sequence plus STOP.

    Returns (l_ce, l_pen, l_total, cache); N of the penalty is the number of
    decode steps of this example.
    """
    prefixes = [list(gold[:t]) for t in range(len(gold) + 1)]
    targets = np.array([params.vocab_id(g) for g in gold] + [params.stop_id], dtype=np.int64)
    logits, cache = _steps_forward(tokens, question, prefixes, params)
    steps = len(targets)
    shifted = logits - logits.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1)) + logits.max(axis=1)
    l_ce = float(np.mean(logz - logits[np.arange(steps), targets]))
    if cfg.penalty_enabled:
        l_pen = topk_penalty(logits, cfg)
        l_total = total_loss(l_ce, l_pen, cfg.max_ratio)
    else:
        l_pen = 0.0
        l_total = l_ce
    cache["targets"] = targets
    return l_ce, l_pen, l_total, cache


def _example_backward(
    tokens: GraphTokens,
    params: AlignmentParams,
    cfg: AlignTrainCfg,
    l_ce: float,
    l_pen: float,
    cache: dict,
    e_struct: np.ndarray,
    e_sem: np.ndarray,
    struct_cache: dict,
) -> dict[str, np.ndarray]:
    """Gradients of the capped total loss for one example."""
    logits = cache["logits"]
    targets = cache["targets"]
    steps, vocab_n = logits.shape
    capped = cfg.penalty_enabled and l_pen > l_ce * cfg.max_ratio
    w_ce = 1.0 + cfg.max_ratio if capped else 1.0
    probs = _softmax_rows(logits)
    dlogits = probs.copy()
    dlogits[np.arange(steps), targets] -= 1.0
    dlogits *= w_ce / steps
    if cfg.penalty_enabled and not capped:
        kth = vocab_n - cfg.top_k
        part = np.argpartition(logits, kth, axis=1)[:, kth:]
        mask = np.zeros_like(logits)
        np.put_along_axis(mask, part, 1.0, axis=1)
        dlogits += (2.0 * cfg.lambda_penalty / steps) * logits * mask

    grads = {name: np.zeros_like(t) for name, t in params.tensors().items()}
    e_g = tokens.rows
    alpha, v, k, q, qbase = cache["alpha"], cache["v"], cache["k"], cache["q"], cache["qbase"]
    grads["w_out"] = cache["attended"].T @ dlogits
    grads["b_out"] = dlogits.sum(axis=0)
    d_attended = dlogits @ params.w_out.T
    d_alpha = d_attended @ v.T
    d_v = alpha.T @ d_attended
    d_scores = _softmax_rows_backward(alpha, d_alpha) / np.sqrt(params.d_prime)
    d_q = d_scores @ k
    d_k = d_scores.T @ q
    d_qbase = d_q @ params.w_q.T
    grads["w_q"] = qbase.T @ d_q
    grads["w_k"] = e_g.T @ d_k
    grads["w_v"] = e_g.T @ d_v
    grads["cat_emb"][cache["ci"]] = d_qbase.sum(axis=0)
    grads["key_emb"][cache["ki"]] = d_qbase.sum(axis=0)

    d_e_g = d_k @ params.w_k.T + d_v @ params.w_v.T
    rel_rows = cache["rel_rows"]
    if rel_rows:
        for row in rel_rows:
            d_e_g[row] += d_qbase.sum(axis=0) / len(rel_rows)
    for t, rows in enumerate(cache["ctx_rows"]):
        for row in rows:
            d_e_g[row] += d_qbase[t] / len(rows)

    half = params.d_prime // 2
    _projector_backward(
        grads, "struct", e_struct, struct_cache["struct"], d_e_g[:, :half], params
    )
    _projector_backward(grads, "sem", e_sem, struct_cache["sem"], d_e_g[:, half:], params)
    return grads


def _projector_forward_cache(e: np.ndarray, which: str, params: AlignmentParams) -> dict:
    if which == "struct":
        w1, b1, w2, b2 = params.struct_w1, params.struct_b1, params.struct_w2, params.struct_b2
    else:
        w1, b1, w2, b2 = params.sem_w1, params.sem_b1, params.sem_w2, params.sem_b2
    h1 = np.tanh(e @ w1 + b1)
    s = _softmax_rows(h1 @ w2 + b2)
    return {"h1": h1, "s": s}


def _projector_backward(
    grads: dict,
    which: str,
    e: np.ndarray,
    cache: dict,
    ds: np.ndarray,
    params: AlignmentParams,
) -> None:
    w2 = params.struct_w2 if which == "struct" else params.sem_w2
    h1, s = cache["h1"], cache["s"]
    dpre2 = _softmax_rows_backward(s, ds)
    grads[f"{which}_w2"] += h1.T @ dpre2
    grads[f"{which}_b2"] += dpre2.sum(axis=0)
    dh1 = dpre2 @ w2.T
    dpre1 = dh1 * (1.0 - h1**2)
    grads[f"{which}_w1"] += e.T @ dpre1
    grads[f"{which}_b1"] += dpre1.sum(axis=0)


def example_loss_and_grads(
    ctx: GraphContext,
    question: ParsedQuestion,
    gold: tuple[str, ...],
    params: AlignmentParams,
    cfg: AlignTrainCfg,
):
    """Full forward/backward for one training example."""
    struct_cache = {
        "struct": _projector_forward_cache(ctx.e_struct, "struct", params),
        "sem": _projector_forward_cache(ctx.e_sem, "sem", params),
    }
    rows = fuse(struct_cache["struct"]["s"], struct_cache["sem"]["s"])
    tokens = GraphTokens(rows=rows, dictionary=ctx.dictionary)
    l_ce, l_pen, l_total, cache = _example_loss(tokens, question, gold, params, cfg)
    grads = _example_backward(
        tokens, params, cfg, l_ce, l_pen, cache, ctx.e_struct, ctx.e_sem, struct_cache
    )
    return l_ce, l_pen, l_total, grads


# ---------------------------------------------------------------------------
# Training


@dataclass
class AlignHistory:
    l_ce: list[float] = field(default_factory=list)
    l_pen: list[float] = field(default_factory=list)
    l_total: list[float] = field(default_factory=list)
    epoch_mean: list[float] = field(default_factory=list)


def _cosine_lr(base: float, epoch: int, total: int) -> float:
    if total <= 1:
        return base
    return base * 0.5 * (1.0 + np.cos(np.pi * epoch / total))


def train_alignment(
    dataset: list[QAPair],
    templates: list[QuestionTemplate],
    contexts: dict[str, GraphContext],
    cfg: AlignTrainCfg,
    params: AlignmentParams | None = None,
) -> tuple[AlignmentParams, AlignHistory]:
    """Teacher-forced AdamW training of projectors and QA head jointly.

    Batch size is one example; the learning rate follows cosine decay over
    epochs. Encoder outputs inside `contexts` stay frozen.
    """
    if not dataset:
        raise ValidationError("empty training dataset")
    for qa in dataset:
        if qa.graph_id not in contexts:
            raise ValidationError(f"no graph context for {qa.graph_id!r}")
    if params is None:
        params = default_params_for(contexts, templates, d_prime=cfg.d_prime, seed=cfg.seed)
    questions = [question_from_pair(qa, templates) for qa in dataset]
    history = AlignHistory()
    tensors = params.tensors()
    adam_m = {name: np.zeros_like(t) for name, t in tensors.items()}
    adam_v = {name: np.zeros_like(t) for name, t in tensors.items()}
    step = 0
    rng = np.random.default_rng(cfg.seed)
    for epoch in range(cfg.epochs):
        lr = _cosine_lr(cfg.lr, epoch, cfg.epochs)
        order = rng.permutation(len(dataset))
        epoch_losses = []
        for i in order:
            qa = dataset[i]
            l_ce, l_pen, l_total, grads = example_loss_and_grads(
                contexts[qa.graph_id], questions[i], qa.answer, params, cfg
            )
            if not np.isfinite(l_total):
                raise TrainingError(f"alignment loss diverged at epoch {epoch}")
            step += 1
            bc1 = 1.0 - cfg.beta1**step
            bc2 = 1.0 - cfg.beta2**step
            for name, tensor in tensors.items():
                g = grads[name]
                adam_m[name] = cfg.beta1 * adam_m[name] + (1.0 - cfg.beta1) * g
                adam_v[name] = cfg.beta2 * adam_v[name] + (1.0 - cfg.beta2) * g * g
                update = (adam_m[name] / bc1) / (np.sqrt(adam_v[name] / bc2) + cfg.adam_eps)
                if cfg.weight_decay:
                    update = update + cfg.weight_decay * tensor
                tensor -= lr * update
            history.l_ce.append(l_ce)
            history.l_pen.append(l_pen)
            history.l_total.append(l_total)
            epoch_losses.append(l_total)
        history.epoch_mean.append(float(np.mean(epoch_losses)))
    return params, history


def default_params_for(
    contexts: dict[str, GraphContext],
    templates: list[QuestionTemplate],
    d_prime: int = 256,
    seed: int = 0,
) -> AlignmentParams:
    """Fresh parameters sized for the given graphs and template bank."""
    vocab: list[str] = []
    for gid in sorted(contexts):
        for name in contexts[gid].graph.entities:
            if name not in vocab:
                vocab.append(name)
    keys: list[str] = []
    for t in templates:
        if t.question_key not in keys:
            keys.append(t.question_key)
    d_in = next(iter(contexts.values())).e_struct.shape[1]
    return init_alignment_params(
        vocab=tuple(vocab),
        categories=CATEGORIES,
        keys=tuple(keys),
        d_in=d_in,
        d_prime=d_prime,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Decoding and evaluation


def answer(
    tokens: GraphTokens,
    question: ParsedQuestion,
    params: AlignmentParams,
    max_steps: int = 16,
) -> list[str]:
    """Greedy decode until STOP or the step budget."""
    decoded: list[str] = []
    for _ in range(max_steps):
        logits = qa_forward(tokens, question, decoded, params)
        choice = int(np.argmax(logits))
        if choice == params.stop_id:
            break
        decoded.append(params.vocab[choice])
    return decoded


def gradient_check(
    ctx: GraphContext,
    question: ParsedQuestion,
    gold: tuple[str, ...],
    params: AlignmentParams,
    cfg: AlignTrainCfg,
    eps: float = 1e-5,
    coords_per_tensor: int | None = None,
) -> float:
    """Max relative error of the analytic gradients vs central differences."""
    from .gradcheck import fd_max_rel_error

    _, _, _, grads = example_loss_and_grads(ctx, question, gold, params, cfg)

    def loss_fn() -> float:
        struct_cache = {
            "struct": _projector_forward_cache(ctx.e_struct, "struct", params),
            "sem": _projector_forward_cache(ctx.e_sem, "sem", params),
        }
        rows = fuse(struct_cache["struct"]["s"], struct_cache["sem"]["s"])
        tokens = GraphTokens(rows=rows, dictionary=ctx.dictionary)
        _, _, l_total, _ = _example_loss(tokens, question, gold, params, cfg)
        return l_total

    return fd_max_rel_error(
        loss_fn, params.tensors(), grads, eps=eps, coords_per_tensor=coords_per_tensor
    )


def evaluate(
    dataset: list[QAPair],
    templates: list[QuestionTemplate],
    params: AlignmentParams,
    contexts: dict[str, GraphContext],
    max_steps: int = 16,
    ablate_relations: bool = False,
):
    """Decode every pair and aggregate the paper's metrics.

    Accuracy averages exact match over single-hop items; nLCS and wJaccard
    average over multi-hop items (falling back to all items when a group is
    empty). Returns an EvalResult.
    """
    from .metrics import EvalResult

    if not dataset:
        raise ValidationError("empty evaluation dataset")
    tokens_by_graph = {
        gid: build_graph_tokens(ctx, params) for gid, ctx in contexts.items()
    }
    if ablate_relations:
        tokens_by_graph = {
            gid: tokens.with_zeroed_relation_rows() for gid, tokens in tokens_by_graph.items()
        }
    items = []
    t0 = time.perf_counter()
    for qa in dataset:
        question = question_from_pair(qa, templates)
        pred = answer(tokens_by_graph[qa.graph_id], question, params, max_steps=max_steps)
        items.append(
            {
                "question": qa.question,
                "category": qa.category,
                "hops": qa.hops,
                "gold": list(qa.answer),
                "pred": pred,
                "exact": exact_match(pred, qa.answer),
                "nlcs": nlcs(pred, qa.answer),
                "wjaccard": wjaccard(pred, qa.answer),
            }
        )
    elapsed_ms = (time.perf_counter() - t0) * 1000.0 / len(dataset)
    single = [it for it in items if it["hops"] == 1] or items
    multi = [it for it in items if it["hops"] > 1] or items
    per_category: dict[str, dict] = {}
    for it in items:
        bucket = per_category.setdefault(
            it["category"], {"count": 0, "exact": 0.0, "nlcs": 0.0, "wjaccard": 0.0}
        )
        bucket["count"] += 1
        bucket["exact"] += it["exact"]
        bucket["nlcs"] += it["nlcs"]
        bucket["wjaccard"] += it["wjaccard"]
    for bucket in per_category.values():
        for key in ("exact", "nlcs", "wjaccard"):
            bucket[key] /= bucket["count"]
    return EvalResult(
        accuracy=float(np.mean([it["exact"] for it in single])),
        nlcs=float(np.mean([it["nlcs"] for it in multi])),
        wjaccard=float(np.mean([it["wjaccard"] for it in multi])),
        per_category=per_category,
        mean_infer_ms=elapsed_ms,
        items=items,
    )
