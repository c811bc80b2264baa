"""Context-free grammar over the flexible-cycle components, derivation-tree
genotypes, and the grammar-constrained genetic operators.

The grammar is level-indexed: a cycle at level l smooths, descends once
(restrict, one or two inner cycles, scaled correction), and smooths again;
at the flexible boundary it bottoms out in the fixed recursive tail (or the
dense coarse solve when the hierarchy ends inside the flexible region).
Level- and count-indexed nonterminal labels make level safety and the
smoothing-length bound properties of the grammar itself, so crossover and
mutation are closed over valid cycles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .amg import AmgHierarchy
from .cycles import (COARSE, CORRECT, RESTRICT, SMOOTH, TAIL, CycleIR, Step)
from .smoothers import KINDS, WEIGHT_SET, SmootherSpec

MAX_SMOOTHS = 4
DEFAULT_N_FLEX = 5
DEFAULT_MAX_DEPTH = 40

_VALUE_SYMBOLS = ("KIND", "ORDER", "WI", "WO", "ALPHA", "SWEEPS")


@dataclass(frozen=True)
class Node:
    symbol: tuple
    prod: int
    children: tuple = ()
    value: object = None

    def depth(self) -> int:
        if not self.children:
            return 1
        return 1 + max(c.depth() for c in self.children)

    def to_sexpr(self) -> str:
        label = ":".join(str(p) for p in self.symbol)
        if self.value is not None:
            return f"({label} {self.value})"
        if not self.children:
            return f"({label})"
        inner = " ".join(c.to_sexpr() for c in self.children)
        return f"({label} {inner})"


class Grammar:
    """Production rules for one hierarchy depth.

    ``n_flex`` is clipped to the hierarchy: the flexible region cannot extend
    past the coarsest level. FC ordering is excluded from the default search
    space; pass ``orderings=("lex", "cf", "fc")`` to enable it.
    """

    def __init__(self, depth: int, n_flex: int = DEFAULT_N_FLEX,
                 max_depth: int = DEFAULT_MAX_DEPTH,
                 orderings: tuple[str, ...] = ("lex", "cf")):
        if depth < 1:
            raise ValueError("hierarchy depth must be >= 1")
        self.hierarchy_depth = depth
        self.flex = min(n_flex, depth - 1)
        self.has_tail = (depth - 1) > self.flex
        self.max_depth = max_depth
        self.orderings = tuple(orderings)
        self.start = ("CYCLE", 0)
        self._min_depth_cache: dict[tuple, int] = {}

    @classmethod
    def for_hierarchy(cls, hierarchy: AmgHierarchy, **kw) -> "Grammar":
        return cls(hierarchy.n_levels, **kw)

    # -- productions -------------------------------------------------------

    def value_choices(self, name: str):
        return {
            "KIND": KINDS,
            "ORDER": self.orderings,
            "WI": WEIGHT_SET,
            "WO": WEIGHT_SET,
            "ALPHA": WEIGHT_SET,
            "SWEEPS": (1, 2, 3, 4),
        }[name]

    def productions(self, symbol: tuple):
        """Child-symbol lists for each production of ``symbol``; value symbols
        return their terminal choice lists instead."""
        head = symbol[0]
        if head in _VALUE_SYMBOLS:
            return self.value_choices(head)
        if head == "CYCLE":
            l = symbol[1]
            if l == self.flex:
                return [[]]  # tail / coarse terminal
            return [[("SMOOTHS", l, 0), ("DESCENT", l), ("SMOOTHS", l, 0)]]
        if head == "DESCENT":
            l = symbol[1]
            return [[("INNER", l + 1), ("ALPHA",)]]
        if head == "INNER":
            l = symbol[1]
            return [[("CYCLE", l)], [("CYCLE", l), ("CYCLE", l)]]
        if head == "SMOOTHS":
            l, k = symbol[1], symbol[2]
            eps = [[]]
            if k < MAX_SMOOTHS:
                return eps + [[("SMOOTH",), ("SMOOTHS", l, k + 1)]]
            return eps
        if head == "SMOOTH":
            return [[("KIND",), ("ORDER",), ("WI",), ("WO",), ("SWEEPS",)]]
        raise KeyError(f"unknown symbol {symbol}")

    def min_depth(self, symbol: tuple) -> int:
        cached = self._min_depth_cache.get(symbol)
        if cached is not None:
            return cached
        self._min_depth_cache[symbol] = 10 ** 9  # cycle guard (grammar is acyclic in level)
        head = symbol[0]
        if head in _VALUE_SYMBOLS:
            d = 1
        else:
            d = min(
                1 + max((self.min_depth(c) for c in prod), default=0)
                for prod in self.productions(symbol)
            )
        self._min_depth_cache[symbol] = d
        return d


def _derive(grammar: Grammar, symbol: tuple, budget: int,
            rng: np.random.Generator) -> Node:
    head = symbol[0]
    if head in _VALUE_SYMBOLS:
        choices = grammar.value_choices(head)
        i = int(rng.integers(len(choices)))
        return Node(symbol=symbol, prod=i, value=choices[i])
    prods = grammar.productions(symbol)
    feasible = [
        i for i, prod in enumerate(prods)
        if 1 + max((grammar.min_depth(c) for c in prod), default=0) <= budget
    ]
    if feasible:
        i = feasible[int(rng.integers(len(feasible)))]
    else:
        # forced termination: shortest completion
        i = min(range(len(prods)),
                key=lambda k: 1 + max((grammar.min_depth(c) for c in prods[k]), default=0))
    children = tuple(_derive(grammar, c, budget - 1, rng) for c in prods[i])
    return Node(symbol=symbol, prod=i, children=children)


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.Generator(np.random.Philox(rng))


class Genotype:
    """A derivation tree plus its lazily decoded cycle."""

    def __init__(self, grammar: Grammar, root: Node):
        self.grammar = grammar
        self.root = root
        self._ir: CycleIR | None = None

    @property
    def ir(self) -> CycleIR:
        if self._ir is None:
            self._ir = genotype_to_cycle(self)
        return self._ir

    def to_sexpr(self) -> str:
        return self.root.to_sexpr()


def derive_random(grammar: Grammar, rng_seed) -> Genotype:
    """Uniformly random derivation; deterministic for a fixed seed. The depth
    budget forces shortest completions near the limit."""
    rng = _as_rng(rng_seed)
    return Genotype(grammar, _derive(grammar, grammar.start, grammar.max_depth, rng))


def _decode(grammar: Grammar, node: Node, level: int, out: list[Step]):
    head = node.symbol[0]
    if head == "CYCLE":
        if node.symbol[1] == grammar.flex:
            kind = TAIL if grammar.has_tail else COARSE
            out.append(Step(kind, grammar.flex))
            return
        pre, descent, post = node.children
        _decode(grammar, pre, level, out)
        _decode(grammar, descent, level, out)
        _decode(grammar, post, level, out)
    elif head == "DESCENT":
        inner, alpha = node.children
        out.append(Step(RESTRICT, level))
        _decode(grammar, inner, level + 1, out)
        out.append(Step(CORRECT, level, alpha=float(alpha.value)))
    elif head == "INNER":
        for child in node.children:
            _decode(grammar, child, level, out)
    elif head == "SMOOTHS":
        for child in node.children:
            _decode(grammar, child, level, out)
    elif head == "SMOOTH":
        kind, order, wi, wo, sweeps = (c.value for c in node.children)
        spec = SmootherSpec(kind=kind, ordering=order, omega_i=float(wi),
                            omega_o=float(wo), sweeps=int(sweeps))
        out.append(Step(SMOOTH, level, spec=spec))


def genotype_to_cycle(g: Genotype) -> CycleIR:
    steps: list[Step] = []
    _decode(g.grammar, g.root, 0, steps)
    return CycleIR(steps=tuple(steps), n_flex=g.grammar.flex)


def _collect(node: Node, path=()):
    yield path, node
    for i, c in enumerate(node.children):
        yield from _collect(c, path + (i,))


def _replace(node: Node, path: tuple, new: Node) -> Node:
    if not path:
        return new
    i = path[0]
    children = list(node.children)
    children[i] = _replace(children[i], path[1:], new)
    return Node(symbol=node.symbol, prod=node.prod, children=tuple(children),
                value=node.value)


def crossover(a: Genotype, b: Genotype, rng) -> tuple[Genotype, Genotype]:
    """Swap subtrees rooted at a shared nonterminal label. Level-indexed
    labels only match at equal levels. If the swap would exceed the depth
    limit, retry up to 8 times, then return the parents unchanged."""
    rng = _as_rng(rng)
    grammar = a.grammar
    nodes_a = list(_collect(a.root))
    nodes_b = list(_collect(b.root))
    labels_a = {n.symbol for _, n in nodes_a}
    labels_b = {n.symbol for _, n in nodes_b}
    common = labels_a & labels_b
    if len(common) > 1:
        common.discard(grammar.start)
    if not common:
        return Genotype(grammar, a.root), Genotype(grammar, b.root)
    labels = sorted(common)
    for _ in range(8):
        label = labels[int(rng.integers(len(labels)))]
        cand_a = [(p, n) for p, n in nodes_a if n.symbol == label]
        cand_b = [(p, n) for p, n in nodes_b if n.symbol == label]
        pa, na = cand_a[int(rng.integers(len(cand_a)))]
        pb, nb = cand_b[int(rng.integers(len(cand_b)))]
        ra = _replace(a.root, pa, nb)
        rb = _replace(b.root, pb, na)
        if ra.depth() <= grammar.max_depth and rb.depth() <= grammar.max_depth:
            return Genotype(grammar, ra), Genotype(grammar, rb)
    return Genotype(grammar, a.root), Genotype(grammar, b.root)


def mutate(g: Genotype, rng) -> Genotype:
    """Regrow a uniformly random node's subtree under the remaining budget."""
    rng = _as_rng(rng)
    grammar = g.grammar
    nodes = list(_collect(g.root))
    path, node = nodes[int(rng.integers(len(nodes)))]
    budget = grammar.max_depth - len(path)
    regrown = _derive(grammar, node.symbol, budget, rng)
    return Genotype(grammar, _replace(g.root, path, regrown))


def init_population(grammar: Grammar, size: int, factor: int, rng) -> list[Genotype]:
    """size * factor random genotypes, deduplicated by serialized cycle text;
    after 100x the target in attempts, duplicates are accepted."""
    if size < 1 or factor < 1:
        raise ValueError("size and factor must be >= 1")
    rng = _as_rng(rng)
    target = size * factor
    seen: dict[str, Genotype] = {}
    extras: list[Genotype] = []
    attempts = 0
    while len(seen) < target and attempts < 100 * target:
        g = derive_random(grammar, rng)
        attempts += 1
        key = g.ir.to_text()
        if key not in seen:
            seen[key] = g
        else:
            extras.append(g)
    pop = list(seen.values())
    while len(pop) < target and extras:
        pop.append(extras.pop())
    return pop[:target]
