import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from pathlib import Path
from typing import Any, Callable, Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .algebra import CycNum, Scalar
from .errors import ActionError, KernelError, ReportError, SectorError

logger = logging.getLogger(__name__)

Point = Hashable
Element = Any

DEFAULT_MATRIX_CAP = 2000
_FLOAT_EXACT = 2.0**52
_INT_SAFE = 2**62


def _plain_sector(point: Point) -> str:
    return "plain"


def _natural_key(point: Point) -> Any:
    return point


@dataclass
class GroupAction:
    name: str
    points: List[Point]
    elements: List[Element]
    act: Callable[[Element, Point], Point]
    identity: Element = None
    compose: Optional[Callable[[Element, Element], Element]] = None
    sector_of: Callable[[Point], str] = _plain_sector
    sort_key: Callable[[Point], Any] = _natural_key
    label: Callable[[Point], str] = str

    @property
    def order(self) -> int:
        return len(self.elements)

    def check_axioms(self, sample: int = 12) -> None:
        if self.identity is not None:
            for x in self.points:
                if self.act(self.identity, x) != x:
                    raise ActionError(f"{self.name}: identity moves {self.label(x)}")
        if self.compose is None:
            return
        elements = self.elements[:sample]
        step = max(1, len(self.points) // sample)
        for x in self.points[::step]:
            for g in elements:
                for h in elements:
                    if self.act(g, self.act(h, x)) != self.act(self.compose(g, h), x):
                        raise ActionError(
                            f"{self.name}: g.(h.x) != (gh).x at {self.label(x)}"
                        )


@dataclass(frozen=True)
class ClassInfo:
    rep: Point
    aut: int
    sector: str
    size: int


@dataclass
class FiniteGroupoid:
    action: GroupAction
    classes: List[ClassInfo]
    index: Dict[Point, int]

    def __len__(self) -> int:
        return len(self.classes)

    @property
    def group_order(self) -> int:
        return self.action.order

    def class_of(self, point: Point) -> int:
        try:
            return self.index[point]
        except KeyError:
            raise ActionError(f"{self.action.name}: {self.action.label(point)} is not a point") from None

    def rep(self, cid: int) -> Point:
        return self.classes[cid].rep

    def auts(self) -> np.ndarray:
        return np.array([c.aut for c in self.classes], dtype=np.int64)

    def sizes(self) -> np.ndarray:
        return np.array([c.size for c in self.classes], dtype=np.int64)

    def mass_balance(self) -> Dict[str, Tuple[Fraction, int]]:
        totals: Dict[str, Tuple[Fraction, int]] = {}
        for c in self.classes:
            mass, _ = totals.get(c.sector, (Fraction(0), 0))
            totals[c.sector] = (mass + Fraction(self.group_order, c.aut), 0)
        for x in self.action.points:
            sector = self.action.sector_of(x)
            mass, count = totals[sector]
            totals[sector] = (mass, count + 1)
        return totals

    def balanced(self) -> bool:
        return all(mass == count for mass, count in self.mass_balance().values())

    def class_table(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "representative": [self.action.label(c.rep) for c in self.classes],
                "sector": [c.sector for c in self.classes],
                "aut": [c.aut for c in self.classes],
                "orbit_size": [c.size for c in self.classes],
            }
        )


def orbits(action: GroupAction, check: bool = True) -> FiniteGroupoid:
    if check:
        action.check_axioms()
    members = set(action.points)
    index: Dict[Point, int] = {}
    classes: List[ClassInfo] = []
    for x in sorted(action.points, key=action.sort_key):
        if x in index:
            continue
        sector = action.sector_of(x)
        orbit = set()
        stabilizer = 0
        for g in action.elements:
            y = action.act(g, x)
            if y not in members:
                raise ActionError(f"{action.name}: {action.label(y)} left the point set")
            if action.sector_of(y) != sector:
                raise ActionError(f"{action.name}: action changed the sector of {action.label(x)}")
            if y == x:
                stabilizer += 1
            orbit.add(y)
        if stabilizer * len(orbit) != action.order:
            raise ActionError(
                f"{action.name}: orbit-stabilizer fails at {action.label(x)} "
                f"({len(orbit)} * {stabilizer} != {action.order})"
            )
        cid = len(classes)
        for y in orbit:
            if y in index:
                raise ActionError(f"{action.name}: orbits of {action.label(x)} overlap")
            index[y] = cid
        classes.append(ClassInfo(x, stabilizer, sector, len(orbit)))
    logger.info(
        "groupoid %s: %d points, %d classes, |H|=%d",
        action.name,
        len(action.points),
        len(classes),
        action.order,
    )
    return FiniteGroupoid(action, classes, index)


@dataclass
class FnOnGroupoid:
    groupoid: FiniteGroupoid
    values: List[CycNum]

    def __getitem__(self, cid: int) -> CycNum:
        return self.values[cid]

    def at(self, point: Point) -> CycNum:
        return self.values[self.groupoid.class_of(point)]

    def __add__(self, other: "FnOnGroupoid") -> "FnOnGroupoid":
        return FnOnGroupoid(self.groupoid, [a + b for a, b in zip(self.values, other.values)])

    def scale(self, factor) -> "FnOnGroupoid":
        return FnOnGroupoid(self.groupoid, [v * factor for v in self.values])

    def __eq__(self, other) -> bool:
        if not isinstance(other, FnOnGroupoid):
            return NotImplemented
        return self.groupoid is other.groupoid and self.values == other.values

    @classmethod
    def from_function(cls, groupoid: FiniteGroupoid, f: Callable[[Point], CycNum]) -> "FnOnGroupoid":
        return cls(groupoid, [f(c.rep) for c in groupoid.classes])


@dataclass
class KernelFn:
    action: GroupAction
    evaluate: Callable[[Point, Point], CycNum]
    name: str = "kernel"
    exceptional: Optional[Callable[[Point], bool]] = None
    phi: Optional[Callable[[Point], CycNum]] = None

    def __call__(self, y: Point, x: Point) -> CycNum:
        return self.evaluate(y, x)

    def is_exceptional(self, point: Point) -> bool:
        return self.exceptional is not None and self.exceptional(point)


def multiplicative_kernel(
    action: GroupAction,
    multiply: Callable[[Point, Point], Point],
    phi: Callable[[Point], CycNum],
    name: str,
    key: Optional[Callable[[Point], Hashable]] = None,
    exceptional: Optional[Callable[[Point], bool]] = None,
) -> KernelFn:
    """K(u, v) = phi(u v), with phi memoised through `key`."""
    cache: Dict[Hashable, CycNum] = {}
    key = key or (lambda point: point)

    def one_variable(point: Point) -> CycNum:
        k = key(point)
        value = cache.get(k)
        if value is None:
            value = cache.setdefault(k, phi(point))
        return value

    def evaluate(u: Point, v: Point) -> CycNum:
        return one_variable(multiply(u, v))

    return KernelFn(action, evaluate, name, exceptional, one_variable)


@dataclass
class FTOperator:
    kernel: KernelFn
    groupoid: FiniteGroupoid


def _zero_like(sample: Optional[CycNum]) -> CycNum:
    if sample is None:
        raise ValueError("cannot infer the value field of an empty function")
    return CycNum.zero(sample.p)


def _parallel_map(fn: Callable[[int], Any], items: Sequence[int], threads: int) -> List[Any]:
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def apply(op: FTOperator, f: FnOnGroupoid, threads: int = 1) -> FnOnGroupoid:
    groupoid = op.groupoid
    points = groupoid.action.points
    h = groupoid.group_order
    zero = _zero_like(f.values[0] if f.values else None)
    point_values = [f.values[groupoid.class_of(x)] for x in points]

    def output(cid: int) -> CycNum:
        y = groupoid.rep(cid)
        total = zero
        for x, fx in zip(points, point_values):
            if not fx.is_zero():
                total = total + op.kernel(y, x) * fx
        return total / h

    return FnOnGroupoid(groupoid, _parallel_map(output, range(len(groupoid)), threads))


def apply_classwise(op: FTOperator, f: FnOnGroupoid) -> FnOnGroupoid:
    groupoid = op.groupoid
    zero = _zero_like(f.values[0] if f.values else None)
    out = []
    for target in groupoid.classes:
        total = zero
        for cid, c in enumerate(groupoid.classes):
            total = total + op.kernel(target.rep, c.rep) * f.values[cid] / c.aut
        out.append(total)
    return FnOnGroupoid(groupoid, out)


def delta(k1: KernelFn, k2: KernelFn, z: Point, x: Point) -> CycNum:
    points = k1.action.points
    total = None
    for y in points:
        term = k1(z, y) * k2(y, x)
        total = term if total is None else total + term
    return total / k1.action.order


class CycMatrix:
    """Matrix over Q(zeta_p) stored as integer exponent counts over a common denominator."""

    def __init__(self, p: int, counts: np.ndarray, denominator: int = 1):
        self.p = p
        self.counts = counts
        self.denominator = denominator

    @property
    def shape(self) -> Tuple[int, int]:
        return self.counts.shape[1], self.counts.shape[2]

    @classmethod
    def from_rows(cls, p: int, rows: Sequence[Sequence[CycNum]]) -> "CycMatrix":
        ids: Dict[CycNum, int] = {}
        table: List[CycNum] = []
        grid = np.empty((len(rows), len(rows[0]) if rows else 0), dtype=np.int64)
        for i, row in enumerate(rows):
            for j, value in enumerate(row):
                vid = ids.get(value)
                if vid is None:
                    vid = ids[value] = len(table)
                    table.append(value)
                grid[i, j] = vid
        denominator = 1
        for value in table:
            for c in value.coeffs:
                denominator = lcm(denominator, c.denominator)
        lifted = np.array(
            [[int(c * denominator) for c in v.to_counts()] for v in table] or [[0] * p],
            dtype=object,
        )
        if all(abs(int(c)) < _INT_SAFE for c in lifted.ravel()):
            lifted = lifted.astype(np.int64)
        counts = np.moveaxis(lifted[grid], 2, 0)
        return cls(p, counts, denominator)

    def matmul(self, other: "CycMatrix", weights: Optional[np.ndarray] = None) -> "CycMatrix":
        p = self.p
        right = other.counts
        if weights is not None:
            right = right * weights.astype(right.dtype)[None, :, None]
        inner = self.shape[1]
        bound = (
            int(np.abs(self.counts).max(initial=0))
            * int(np.abs(right).max(initial=0))
            * max(inner, 1)
            * p
        )
        if bound < _FLOAT_EXACT:
            left_f, right_f = self.counts.astype(np.float64), right.astype(np.float64)
            out = np.zeros((p, self.shape[0], other.shape[1]), dtype=np.float64)
            for i in range(p):
                for j in range(p):
                    out[(i + j) % p] += left_f[i] @ right_f[j]
            out = np.rint(out).astype(np.int64)
        else:
            dtype = np.int64 if bound < _INT_SAFE else object
            if dtype is object:
                logger.warning("cyclotomic matrix product falls back to object dtype")
            left, right = self.counts.astype(dtype), right.astype(dtype)
            out = np.zeros((p, self.shape[0], other.shape[1]), dtype=dtype)
            for i in range(p):
                for j in range(p):
                    out[(i + j) % p] = out[(i + j) % p] + left[i].dot(right[j])
        return CycMatrix(p, out, self.denominator * other.denominator)

    def reduced(self) -> np.ndarray:
        """Coefficients in the basis zeta^0..zeta^(p-2), still scaled by the denominator."""
        return self.counts[: self.p - 1] - self.counts[self.p - 1][None, :, :]

    def entry(self, i: int, j: int) -> CycNum:
        return CycNum.from_counts(
            self.p, [Fraction(int(c), self.denominator) for c in self.counts[:, i, j]]
        )


@dataclass
class Witness:
    z: Point
    x: Point
    value: CycNum
    expected: CycNum


@dataclass
class InvolutivityResult:
    passed: bool
    scale: Fraction
    classes: int
    method: str
    witness: Optional[Witness] = None
    exceptional: List[Witness] = field(default_factory=list)
    mismatches: int = 0


def _twist_map(groupoid: FiniteGroupoid, twist: Optional[Callable[[Point], Point]]) -> np.ndarray:
    if twist is None:
        return np.arange(len(groupoid), dtype=np.int64)
    return np.array([groupoid.class_of(twist(c.rep)) for c in groupoid.classes], dtype=np.int64)


def check_involutive(
    kernel: KernelFn,
    expected_scale: Scalar,
    twist: Optional[Callable[[Point], Point]] = None,
    groupoid: Optional[FiniteGroupoid] = None,
    matrix_cap: int = DEFAULT_MATRIX_CAP,
    threads: int = 1,
    report_limit: int = 32,
    search: Optional[Callable[[Point], Any]] = None,
) -> InvolutivityResult:
    """Compare F o F with scale * twist^*; search= walks class pairs in that key order up to the
    first mismatch of any kind."""
    groupoid = groupoid or orbits(kernel.action)
    if search is not None:
        return _check_by_pairs(kernel, groupoid, Fraction(expected_scale), twist, search)
    n = len(groupoid)
    h = groupoid.group_order
    points = kernel.action.points
    scale = Fraction(expected_scale)
    reps = [c.rep for c in groupoid.classes]
    p = kernel(reps[0], reps[0]).p
    exceptional = np.array([kernel.is_exceptional(r) for r in reps], dtype=bool)

    if kernel.exceptional is not None and exceptional.any() and n * len(points) <= matrix_cap**2:
        method = "points"
        logger.debug("%s: point-sum matrices %dx%d", kernel.name, n, len(points))
        left = CycMatrix.from_rows(
            p, _parallel_map(lambda i: [kernel(reps[i], y) for y in points], range(n), threads)
        )
        right_rows = _parallel_map(lambda j: [kernel(y, reps[j]) for y in points], range(n), threads)
        right = CycMatrix.from_rows(p, [list(col) for col in zip(*right_rows)])
        product = left.matmul(right)
    elif kernel.exceptional is None or not exceptional.any():
        if n > matrix_cap:
            return _check_by_pairs(kernel, groupoid, scale, twist)
        method = "matrix"
        logger.debug("%s: class-indexed matrix %dx%d", kernel.name, n, n)
        matrix = CycMatrix.from_rows(
            p, _parallel_map(lambda i: [kernel(reps[i], r) for r in reps], range(n), threads)
        )
        product = matrix.matmul(matrix, weights=groupoid.sizes())
    else:
        return _check_by_pairs(kernel, groupoid, scale, twist)

    # product holds |H| * D^2 * Delta
    reduced = product.reduced()
    norm = h * product.denominator
    target = _twist_map(groupoid, twist)
    auts = groupoid.auts()
    hits = np.zeros((n, n), dtype=bool)
    hits[target, np.arange(n)] = True
    scaled = scale * norm
    if scaled.denominator == 1:
        expected = np.zeros((n, n), dtype=reduced.dtype)
        expected[hits] = (int(scaled) * auts[:, None].repeat(n, axis=1))[hits]
        ok = np.asarray(reduced[0] == expected, dtype=bool)
    else:
        ok = ~hits & np.asarray(reduced[0] == 0, dtype=bool)
    ok &= np.asarray(reduced[1:] == 0, dtype=bool).all(axis=0)
    bad = np.argwhere(~ok)

    def as_witness(z: int, x: int) -> Witness:
        value = product.entry(z, x) / h
        want = scale * int(auts[z]) if hits[z, x] else Fraction(0)
        return Witness(reps[z], reps[x], value, CycNum.from_int(p, want))

    result = InvolutivityResult(True, scale, n, method, mismatches=len(bad))
    for z, x in bad:
        if exceptional[z] or exceptional[x]:
            if len(result.exceptional) < report_limit:
                result.exceptional.append(as_witness(z, x))
        elif result.witness is None:
            result.witness = as_witness(z, x)
            result.passed = False
    if result.exceptional:
        logger.warning(
            "%s: %d mismatches on the exceptional locus", kernel.name, len(result.exceptional)
        )
    return result


def _check_by_pairs(
    kernel: KernelFn,
    groupoid: FiniteGroupoid,
    scale: Fraction,
    twist: Optional[Callable[[Point], Point]],
    search: Optional[Callable[[Point], Any]] = None,
) -> InvolutivityResult:
    classes = groupoid.classes
    order = list(range(len(classes)))
    if search is None:
        logger.debug("%s: %d classes over the cap, checking pairwise", kernel.name, len(groupoid))
    else:
        order.sort(key=lambda i: search(classes[i].rep))
        logger.debug("%s: searching %d classes for a mismatch", kernel.name, len(groupoid))
    target = _twist_map(groupoid, twist)
    result = InvolutivityResult(True, scale, len(groupoid), "pairs" if search is None else "search")
    for z in order:
        cz = classes[z]
        for x in order:
            cx = classes[x]
            value = delta(kernel, kernel, cz.rep, cx.rep)
            want = scale * cz.aut if target[x] == z else Fraction(0)
            if value != want:
                witness = Witness(cz.rep, cx.rep, value, CycNum.from_int(value.p, want))
                result.mismatches += 1
                if kernel.is_exceptional(cz.rep) or kernel.is_exceptional(cx.rep):
                    result.exceptional.append(witness)
                    if search is not None:
                        return result
                    continue
                result.witness = witness
                result.passed = False
                return result
    return result


def quotient_kernel(
    kernel: KernelFn,
    extra: GroupAction,
    target: GroupAction,
    pairs: Optional[Iterable[Tuple[Point, Point]]] = None,
    name: Optional[str] = None,
) -> KernelFn:
    """K^{[Z/H]}(x, y) = sum over h of K(h.x, y) for an extra group H acting on the points of Z."""

    def evaluate(y: Point, x: Point) -> CycNum:
        total = None
        for e in extra.elements:
            term = kernel(extra.act(e, y), x)
            total = term if total is None else total + term
        return total

    if pairs is None:
        reps = [c.rep for c in orbits(kernel.action, check=False).classes]
        pairs = [(a, b) for a in reps for b in reps]
    for y, x in pairs:
        for e in extra.elements:
            if kernel(extra.act(e, y), extra.act(e, x)) != kernel(y, x):
                raise KernelError(f"{kernel.name} is not invariant under {extra.name}")
        other_side = None
        for e in extra.elements:
            term = kernel(y, extra.act(e, x))
            other_side = term if other_side is None else other_side + term
        if other_side != evaluate(y, x):
            raise KernelError(f"{kernel.name}: the two quotient sums disagree")
    return KernelFn(target, evaluate, name or f"{kernel.name}/{extra.name}", kernel.exceptional)


def assemble_sectors(
    blocks: Dict[str, KernelFn], action: GroupAction, name: str = "assembled"
) -> KernelFn:
    zero = None

    def evaluate(y: Point, x: Point) -> CycNum:
        nonlocal zero
        sy, sx = action.sector_of(y), action.sector_of(x)
        for s, point in ((sy, y), (sx, x)):
            if s not in blocks:
                raise SectorError(f"{name}: {action.label(point)} has unknown sector {s!r}")
        if sy != sx:
            if zero is None:
                sample = next(iter(blocks.values()))
                rep = sample.action.points[0]
                zero = CycNum.zero(sample(rep, rep).p)
            return zero
        return blocks[sy](y, x)

    exceptional_parts = [b.exceptional for b in blocks.values() if b.exceptional is not None]
    exceptional = None
    if exceptional_parts:
        exceptional = lambda point: any(part(point) for part in exceptional_parts)  # noqa: E731
    return KernelFn(action, evaluate, name, exceptional)


def push_quotient(
    f: Callable[[Point], CycNum], action: GroupAction, groupoid: FiniteGroupoid
) -> FnOnGroupoid:
    values = []
    for c in groupoid.classes:
        total = None
        for g in action.elements:
            term = f(action.act(g, c.rep))
            total = term if total is None else total + term
        values.append(total)
    return FnOnGroupoid(groupoid, values)


def push_further(
    f: FnOnGroupoid, extra: GroupAction, target: FiniteGroupoid, zero: CycNum
) -> FnOnGroupoid:
    """Pushforward along [X/H] -> [X/H x E]; classes outside the image of X get 0."""
    source = f.groupoid
    values = []
    for c in target.classes:
        if c.rep not in source.index:
            values.append(zero)
            continue
        total = zero
        for e in extra.elements:
            total = total + f.values[source.class_of(extra.act(e, c.rep))]
        values.append(total)
    return FnOnGroupoid(target, values)


def push_set_map(
    values: Iterable[Tuple[Point, CycNum]],
    mapping: Callable[[Point], Point],
    target: FiniteGroupoid,
    zero: CycNum,
) -> FnOnGroupoid:
    """Pushforward from a finite set along a map into a groupoid: sum over the fibre, times |Aut(y)|."""
    totals = [zero] * len(target)
    for x, value in values:
        cid = target.class_of(mapping(x))
        totals[cid] = totals[cid] + value
    return FnOnGroupoid(
        target, [total * c.aut for total, c in zip(totals, target.classes)]
    )


def transport(
    f: FnOnGroupoid,
    mapping: Callable[[Point], Point],
    target: FiniteGroupoid,
) -> FnOnGroupoid:
    source = f.groupoid
    image: Dict[int, int] = {}
    for cid, c in enumerate(source.classes):
        tid = target.class_of(mapping(c.rep))
        if tid in image:
            raise KernelError(
                f"{source.action.name} -> {target.action.name} identifies two classes"
            )
        if target.classes[tid].aut != c.aut:
            raise KernelError(
                f"stabilizers differ at {source.action.label(c.rep)}: {c.aut} vs {target.classes[tid].aut}"
            )
        image[tid] = cid
    if len(image) != len(target):
        raise KernelError(f"{source.action.name} -> {target.action.name} is not surjective on classes")
    return FnOnGroupoid(target, [f.values[image[tid]] for tid in range(len(target))])


def class_map_summary(
    source: FiniteGroupoid, mapping: Callable[[Point], Point], target: FiniteGroupoid
) -> pd.DataFrame:
    rows = []
    for c in source.classes:
        t = target.classes[target.class_of(mapping(c.rep))]
        rows.append(
            {
                "source": source.action.label(c.rep),
                "source_aut": c.aut,
                "target": target.action.label(t.rep),
                "target_aut": t.aut,
            }
        )
    return pd.DataFrame(rows)


def kernel_matrix(kernel: KernelFn, groupoid: FiniteGroupoid) -> List[List[CycNum]]:
    reps = [c.rep for c in groupoid.classes]
    return [[kernel(y, x) for x in reps] for y in reps]


def export_kernel_csv(kernel: KernelFn, groupoid: FiniteGroupoid, path: Path) -> Path:
    labels = [groupoid.action.label(c.rep) for c in groupoid.classes]
    rows = kernel_matrix(kernel, groupoid)
    frame = pd.DataFrame([[str(v) for v in row] for row in rows], index=labels, columns=labels)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path)
    except OSError as exc:
        raise ReportError(f"cannot write kernel table {path}: {exc}") from exc
    return path


def extend_by_zero(
    f: FnOnGroupoid,
    embed: Callable[[Point], Point],
    target: FiniteGroupoid,
    zero: CycNum,
) -> FnOnGroupoid:
    """i_! along an open embedding: f on the image classes, 0 on the boundary."""
    values = [zero] * len(target)
    for cid, c in enumerate(f.groupoid.classes):
        tid = target.class_of(embed(c.rep))
        if target.classes[tid].aut != c.aut:
            raise KernelError(f"{target.action.name}: embedding changes the stabilizer of {c.rep}")
        values[tid] = f.values[cid]
    return FnOnGroupoid(target, values)


def restrict(
    f: FnOnGroupoid, embed: Callable[[Point], Point], source: FiniteGroupoid
) -> FnOnGroupoid:
    """i^*: pull a function on the target back along the embedding."""
    return FnOnGroupoid(source, [f.at(embed(c.rep)) for c in source.classes])
