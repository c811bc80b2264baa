"""Flexible-cycle intermediate representation and its interpreter.

A cycle is a flat, well-bracketed sequence of primitive steps over the level
hierarchy: per-level smoothing, restriction of the current residual, scaled
coarse-grid correction, a fixed recursive V(1,1) tail below the flexible
region, and a dense coarse solve. One execution applies the preconditioner
once, starting from the zero vector, so the resulting operator is linear and
can sit inside right-preconditioned GMRES.
"""

from __future__ import annotations

from dataclasses import dataclass
import json

import numpy as np
import scipy.linalg

from . import sparse, smoothers
from .amg import AmgHierarchy
from .smoothers import SmootherSpec, WEIGHT_SET

# a visit to a level can carry pre- and post-smoothing runs of up to 4 steps
# each; two adjacent sub-visits can make their runs abut, so the longest legal
# contiguous run at one level is 8
MAX_SMOOTH_RUN = 8
MAX_SUBVISITS = 2

SMOOTH, RESTRICT, CORRECT, TAIL, COARSE = "smooth", "restrict", "correct", "tail", "coarse"


@dataclass(frozen=True)
class Step:
    kind: str
    level: int
    spec: SmootherSpec | None = None
    alpha: float | None = None

    def to_text(self) -> str:
        if self.kind == SMOOTH:
            return f"smooth L{self.level} {self.spec.token()}"
        if self.kind == RESTRICT:
            return f"restrict L{self.level}->L{self.level + 1}"
        if self.kind == CORRECT:
            return f"correct L{self.level + 1}->L{self.level} alpha={self.alpha:g}"
        if self.kind == TAIL:
            return f"tail L{self.level}"
        return f"coarse L{self.level}"


@dataclass(frozen=True)
class CycleIR:
    steps: tuple[Step, ...]
    n_flex: int

    def to_text(self) -> str:
        lines = [f"nflex {self.n_flex}"]
        lines += [s.to_text() for s in self.steps]
        return "\n".join(lines) + "\n"

    def to_line(self) -> str:
        """Single-line form (steps joined by ';'), convenient inside CSV."""
        return "; ".join([f"nflex {self.n_flex}"] + [s.to_text() for s in self.steps])

    def to_json(self) -> str:
        return json.dumps({"n_flex": self.n_flex,
                           "steps": [s.to_text() for s in self.steps]})


class CycleParseError(ValueError):
    pass


def _parse_step(line: str, lineno: int) -> Step:
    parts = line.split()
    try:
        if parts[0] == "smooth" and len(parts) == 3:
            return Step(SMOOTH, _lvl(parts[1]), spec=SmootherSpec.from_token(parts[2]))
        if parts[0] == "restrict" and len(parts) == 2:
            a, b = parts[1].split("->")
            la, lb = _lvl(a), _lvl(b)
            if lb != la + 1:
                raise ValueError("restrict must go one level down")
            return Step(RESTRICT, la)
        if parts[0] == "correct" and len(parts) == 3:
            a, b = parts[1].split("->")
            la, lb = _lvl(a), _lvl(b)
            if la != lb + 1:
                raise ValueError("correct must go one level up")
            key, _, val = parts[2].partition("=")
            if key != "alpha":
                raise ValueError("expected alpha=<value>")
            return Step(CORRECT, lb, alpha=float(val))
        if parts[0] == "tail" and len(parts) == 2:
            return Step(TAIL, _lvl(parts[1]))
        if parts[0] == "coarse" and len(parts) == 2:
            return Step(COARSE, _lvl(parts[1]))
    except (ValueError, IndexError, smoothers.SmootherError) as exc:
        raise CycleParseError(f"line {lineno}: {exc}") from exc
    raise CycleParseError(f"line {lineno}: unrecognized step {line!r}")


def _lvl(token: str) -> int:
    if not token.startswith("L"):
        raise ValueError(f"bad level token {token!r}")
    return int(token[1:])


def from_text(text: str) -> CycleIR:
    lines = [piece.strip() for ln in text.splitlines() for piece in ln.split(";")]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or not lines[0].startswith("nflex"):
        raise CycleParseError("line 1: expected 'nflex <count>' header")
    try:
        n_flex = int(lines[0].split()[1])
    except (IndexError, ValueError) as exc:
        raise CycleParseError(f"line 1: {exc}") from exc
    steps = tuple(_parse_step(ln, i + 2) for i, ln in enumerate(lines[1:]))
    return CycleIR(steps=steps, n_flex=n_flex)


def from_json(text: str) -> CycleIR:
    obj = json.loads(text)
    steps = tuple(_parse_step(ln, i + 1) for i, ln in enumerate(obj["steps"]))
    return CycleIR(steps=steps, n_flex=int(obj["n_flex"]))


def validate(ir: CycleIR, hierarchy: AmgHierarchy) -> list[str]:
    """Check every IR invariant against the concrete hierarchy; returns the
    (possibly empty) list of violations."""
    v = []
    coarsest = hierarchy.n_levels - 1
    level = 0
    smooth_run = 0
    subvisit_stack = []  # open Restricts: sub-visit counters per open descent
    for idx, step in enumerate(ir.steps):
        where = f"step {idx} ({step.to_text()})"
        if step.kind == SMOOTH:
            if step.level != level:
                v.append(f"{where}: smooth at level {step.level}, execution is at {level}")
            smooth_run += 1
            if smooth_run == MAX_SMOOTH_RUN + 1:
                v.append(f"{where}: more than {MAX_SMOOTH_RUN} consecutive smooths at one level")
            continue
        smooth_run = 0
        if step.kind == RESTRICT:
            if step.level != level:
                v.append(f"{where}: unbalanced at level {step.level}, execution is at {level}")
            if level + 1 > coarsest:
                v.append(f"{where}: restrict below the coarsest level {coarsest}")
            if subvisit_stack:
                subvisit_stack[-1] += 1
                if subvisit_stack[-1] == MAX_SUBVISITS + 1:
                    v.append(f"{where}: more than {MAX_SUBVISITS} sub-visits in one visit")
            subvisit_stack.append(0)
            level += 1
        elif step.kind == CORRECT:
            if step.level != level - 1 or not subvisit_stack:
                v.append(f"{where}: unbalanced at level {level}")
            else:
                subvisit_stack.pop()
                level -= 1
            if step.alpha is None or round(step.alpha, 2) not in WEIGHT_SET:
                v.append(f"{where}: alpha outside sample set")
        elif step.kind == TAIL:
            if step.level != level:
                v.append(f"{where}: tail at level {step.level}, execution is at {level}")
            if step.level != ir.n_flex:
                v.append(f"{where}: tail only allowed at the flexible boundary {ir.n_flex}")
            if step.level >= coarsest:
                v.append(f"{where}: no levels below {step.level} for the tail")
        elif step.kind == COARSE:
            if step.level != level:
                v.append(f"{where}: coarse solve at level {step.level}, execution is at {level}")
            if step.level != coarsest:
                v.append(f"{where}: coarse solve only at the coarsest level {coarsest}")
            if coarsest > ir.n_flex:
                v.append(f"{where}: coarsest level lies below the flexible region")
    if level != 0 or subvisit_stack:
        v.append(f"unbalanced cycle: execution ends at level {level}")
    return v


_TAIL_PRE = SmootherSpec(kind="gs-fwd", ordering="cf")
_TAIL_POST = SmootherSpec(kind="gs-bwd", ordering="cf")


def _coarse_solve(hierarchy: AmgHierarchy, level: int, b: np.ndarray) -> np.ndarray:
    return scipy.linalg.lu_solve(hierarchy.levels[level].lu, b)


def _tail_vcycle(hierarchy: AmgHierarchy, level: int, b: np.ndarray,
                 x: np.ndarray) -> np.ndarray:
    """One recursive V(1,1) symmetric-GS cycle from ``level`` to the coarsest."""
    if level == hierarchy.n_levels - 1:
        return _coarse_solve(hierarchy, level, b)
    lvl = hierarchy.levels[level]
    x = smoothers.relax_sweep(lvl.A, b, x, _TAIL_PRE, lvl.relax)
    x = smoothers.relax_sweep(lvl.A, b, x, _TAIL_POST, lvl.relax)
    r = sparse.residual(lvl.A, x, b)
    bc = sparse.spmv(lvl.R, r)
    xc = _tail_vcycle(hierarchy, level + 1, bc, np.zeros(lvl.P.n_cols))
    x = x + sparse.spmv(lvl.P, xc)
    x = smoothers.relax_sweep(lvl.A, b, x, _TAIL_PRE, lvl.relax)
    x = smoothers.relax_sweep(lvl.A, b, x, _TAIL_POST, lvl.relax)
    return x


def execute(ir: CycleIR, hierarchy: AmgHierarchy, b: np.ndarray) -> np.ndarray:
    """Apply the preconditioner defined by ``ir`` once: returns M^{-1} b,
    starting from the zero initial guess."""
    L = hierarchy.n_levels
    x = [None] * L
    rhs = [None] * L
    x[0] = np.zeros(hierarchy.levels[0].A.n_rows)
    rhs[0] = np.asarray(b, dtype=np.float64)
    for step in ir.steps:
        l = step.level
        lvl = hierarchy.levels[l]
        if step.kind == SMOOTH:
            x[l] = smoothers.relax_sweep(lvl.A, rhs[l], x[l], step.spec, lvl.relax)
        elif step.kind == RESTRICT:
            r = sparse.residual(lvl.A, x[l], rhs[l])
            rhs[l + 1] = sparse.spmv(lvl.R, r)
            x[l + 1] = np.zeros(hierarchy.levels[l + 1].A.n_rows)
        elif step.kind == CORRECT:
            x[l] = x[l] + step.alpha * sparse.spmv(lvl.P, x[l + 1])
        elif step.kind == TAIL:
            x[l] = _tail_vcycle(hierarchy, l, rhs[l], x[l])
        elif step.kind == COARSE:
            x[l] = _coarse_solve(hierarchy, l, rhs[l])
    return x[0]


def execute_linearity_probe(ir: CycleIR, hierarchy: AmgHierarchy,
                            x: np.ndarray, y: np.ndarray,
                            rng: np.random.Generator | None = None) -> dict:
    """Check execute(a x + b y) = a execute(x) + b execute(y) for random a, b."""
    rng = rng or np.random.default_rng(0)
    a, b_ = rng.uniform(-2, 2, size=2)
    lhs = execute(ir, hierarchy, a * x + b_ * y)
    rhs = a * execute(ir, hierarchy, x) + b_ * execute(ir, hierarchy, y)
    scale = max(float(np.max(np.abs(rhs))), 1e-300)
    dev = float(np.max(np.abs(lhs - rhs))) / scale
    return {"max_relative_deviation": dev, "linear": dev <= 1e-12,
            "coefficients": (float(a), float(b_))}


def _as_specs(spec) -> tuple[SmootherSpec, ...]:
    if isinstance(spec, SmootherSpec):
        return (spec,)
    return tuple(spec)


def encode_vcycle(hierarchy: AmgHierarchy, pre=None, post=None) -> CycleIR:
    """Canonical V-cycle over the full hierarchy: per level pre-smooth,
    restrict, recurse, correct with alpha=1, post-smooth; dense solve at the
    bottom. ``pre``/``post`` accept a single SmootherSpec or a sequence."""
    pre = _as_specs(pre if pre is not None else SmootherSpec())
    post = _as_specs(post if post is not None else SmootherSpec(kind="gs-bwd"))
    coarsest = hierarchy.n_levels - 1

    def build(l):
        if l == coarsest:
            return [Step(COARSE, l)]
        steps = [Step(SMOOTH, l, spec=s) for s in pre]
        steps.append(Step(RESTRICT, l))
        steps += build(l + 1)
        steps.append(Step(CORRECT, l, alpha=1.0))
        steps += [Step(SMOOTH, l, spec=s) for s in post]
        return steps

    return CycleIR(steps=tuple(build(0)), n_flex=coarsest)


# V-cycle solve-phase parameters of the reference AMG configurations:
# (cf ordering, pre smoother, pre sweeps, post smoother, post sweeps, wi, wo)
REFERENCE_CONFIGS = {
    "default": dict(cf=True, s_pre="sym", n_pre=1, s_post="sym", n_post=1, wi=1.0, wo=1.0),
    "tuned-1": dict(cf=False, s_pre="sym", n_pre=1, s_post="sym", n_post=1, wi=1.0, wo=1.0),
    "tuned-2": dict(cf=False, s_pre="fwd", n_pre=1, s_post="bwd", n_post=1, wi=0.8, wo=1.0),
    "tuned-3": dict(cf=False, s_pre="sym", n_pre=3, s_post="sym", n_post=3, wi=1.0, wo=1.0),
    "tuned-4": dict(cf=False, s_pre="fwd", n_pre=3, s_post="bwd", n_post=3, wi=0.8, wo=1.0),
}


def _ref_smooths(style, sweeps, ordering, wi, wo):
    mk = lambda kind: SmootherSpec(kind=kind, ordering=ordering, omega_i=wi, omega_o=wo)
    if style == "sym":
        # symmetric GS: forward followed by backward, per sweep
        return tuple(mk("gs-fwd" if i % 2 == 0 else "gs-bwd") for i in range(2 * sweeps))
    kind = "gs-fwd" if style == "fwd" else "gs-bwd"
    return tuple(mk(kind) for _ in range(sweeps))


def encode_reference(name: str):
    """Return a builder mapping a hierarchy to the named reference V-cycle."""
    if name not in REFERENCE_CONFIGS:
        raise KeyError(f"unknown reference {name!r}; choose from {sorted(REFERENCE_CONFIGS)}")
    cfg = REFERENCE_CONFIGS[name]
    ordering = "cf" if cfg["cf"] else "lex"

    def build(hierarchy: AmgHierarchy) -> CycleIR:
        pre = _ref_smooths(cfg["s_pre"], cfg["n_pre"], ordering, cfg["wi"], cfg["wo"])
        post = _ref_smooths(cfg["s_post"], cfg["n_post"], ordering, cfg["wi"], cfg["wo"])
        return encode_vcycle(hierarchy, pre=pre, post=post)

    return build


def tail_work_units(hierarchy: AmgHierarchy, level: int) -> float:
    """Deterministic cost of one V(1,1) symmetric-GS tail from ``level``."""
    if level == hierarchy.n_levels - 1:
        n = hierarchy.levels[level].A.n_rows
        return float(n * n)
    lvl = hierarchy.levels[level]
    # 2 sym-GS smooths (2 passes each) + residual + both transfers
    cost = 4.0 * lvl.A.nnz + lvl.A.nnz + 2.0 * lvl.P.nnz
    return cost + tail_work_units(hierarchy, level + 1)


def work_units(ir: CycleIR, hierarchy: AmgHierarchy) -> float:
    """Nonzeros touched by one preconditioner application: relaxation and
    residual cost nnz(A_l) per sweep, transfers cost nnz(P_l), and the dense
    coarse solve costs n_c^2."""
    total = 0.0
    for step in ir.steps:
        lvl = hierarchy.levels[step.level]
        if step.kind == SMOOTH:
            total += lvl.A.nnz * step.spec.sweeps
        elif step.kind == RESTRICT:
            total += lvl.A.nnz + lvl.P.nnz
        elif step.kind == CORRECT:
            total += lvl.P.nnz
        elif step.kind == TAIL:
            total += tail_work_units(hierarchy, step.level)
        elif step.kind == COARSE:
            total += float(lvl.A.n_rows) ** 2
    return total


def render_trace(ir: CycleIR) -> list[tuple[int, int, str, str]]:
    """Rows of (step index, level, kind, detail) for level-vs-step figures."""
    rows = []
    for i, step in enumerate(ir.steps):
        detail = ""
        if step.kind == SMOOTH:
            detail = step.spec.token()
        elif step.kind == CORRECT:
            detail = f"alpha={step.alpha:g}"
        rows.append((i, step.level, step.kind, detail))
    return rows
