import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

from . import __version__
from .algebra import (
    CharacterSums,
    CycNum,
    FieldCtx,
    character_twist,
    crucial_identity_holds,
    make_chars,
    make_field,
)
from .config import CheckConfig
from .groupoid import (
    FiniteGroupoid,
    InvolutivityResult,
    KernelFn,
    check_involutive,
    export_kernel_csv,
)
from .groups import GroupId, enumerate_stack_points, torus_stack_points
from .kernels import (
    IdentityCheck,
    assembled_stack_kernel,
    calT_table_check,
    calTsigma_checks,
    char2_checks,
    descent_check,
    extension_check,
    extension_operator_check,
    gl2_calT_pullback,
    gl2_delta_witness,
    gl2_table_general_check,
    non_descent_witness,
    phi_calT_involutivity,
    phi_stack_gl2_involutivity,
    pushforward_identities,
    restriction_check,
    stack_kernel,
    t3_twist,
    torus_oracles,
    torus_stack_extension,
    torus_stack_kernel,
)
from .quadform import (
    EvenQuadSpace,
    QuadSpace,
    check_isotropic_count,
    check_isotropic_sums,
    check_theo2,
    check_weil_sums,
    gl2_model,
    proof_identities,
)
from .report import FAIL, FINDING, PASS, CheckRecord, Report
from .utils import prime_power, slugify

logger = logging.getLogger(__name__)

TORUS_GROUPS = (GroupId.SL2, GroupId.PGL2, GroupId.GL2)
# point-sum matrices for the GL2 table kernel grow like q^10; above this q a mismatch search runs
GL2_STACK_EXHAUSTIVE_Q = 3
GL2_MODEL_MAX_Q = 5


@dataclass
class Job:
    group: str
    q: int
    suite: str
    config: CheckConfig
    ctx: FieldCtx
    chars: CharacterSums
    threads: int = 1

    @property
    def point_limit(self) -> Optional[int]:
        return self.config.point_limit(self.group)

    def record(self, name: str, status: str, **fields) -> CheckRecord:
        return CheckRecord(
            check_id=f"{self.group}-q{self.q}:{self.suite}:{name}",
            suite=self.suite,
            group=self.group,
            q=self.q,
            status=status,
            **fields,
        )

    def export(self, kernel: KernelFn, groupoid: FiniteGroupoid) -> None:
        if not self.config.export_tables:
            return
        path = Path(self.config.tables_dir) / f"{slugify(kernel.name)}.csv"
        export_kernel_csv(kernel, groupoid, path)
        logger.info("exported %s", path)


def field_for(q: int) -> FieldCtx:
    p, k = prime_power(q)
    return make_field(p, k)


def _timed(fn: Callable, *args, **kwargs):
    start = time.perf_counter()
    value = fn(*args, **kwargs)
    return value, time.perf_counter() - start


def identity_record(
    job: Job, check: IdentityCheck, seconds: float = 0.0, finding: bool = False
) -> CheckRecord:
    """A mismatch is a fail, or a finding when the compared statement is known to be off."""
    if check.passed:
        status = PASS
    else:
        status = FINDING if finding else FAIL
    return job.record(
        check.name,
        status,
        theorem=not finding,
        witness=check.witness,
        compared=check.compared,
        detail={**check.detail, "mismatches": str(check.mismatches)},
        seconds=seconds,
    )


def negative_record(job: Job, check: IdentityCheck, seconds: float = 0.0) -> CheckRecord:
    """check.passed means the counterexample was found."""
    return job.record(
        check.name,
        PASS if check.passed else FAIL,
        expected="counterexample",
        computed="found" if check.passed else "none",
        witness=check.witness,
        compared=check.compared,
        detail=dict(check.detail),
        seconds=seconds,
    )


def _format_witness(label: Callable, result: InvolutivityResult) -> Optional[str]:
    w = result.witness or (result.exceptional[0] if result.exceptional else None)
    if w is None:
        return None
    return f"Delta({label(w.z)}, {label(w.x)}) = {w.value}, expected {w.expected}"


def involutivity_record(
    job: Job,
    name: str,
    label: Callable,
    result: InvolutivityResult,
    seconds: float = 0.0,
    expect: str = PASS,
) -> CheckRecord:
    """expect=PASS: a theorem; expect=FAIL: a stated negative result; expect=FINDING: a variant."""
    holds = result.passed and not result.exceptional
    if expect == PASS:
        status = PASS if result.passed else FAIL
    elif expect == FAIL:
        status = FAIL if holds else PASS
    else:
        status = PASS if holds else FINDING
    detail = {"method": result.method, "mismatches": str(result.mismatches)}
    if result.exceptional:
        detail["exceptional"] = str(len(result.exceptional))
    return job.record(
        name,
        status,
        theorem=expect != FINDING,
        expected=f"{result.scale} id" if expect == PASS else ("not involutive" if expect == FAIL else None),
        computed="involutive" if holds else "not involutive",
        witness=_format_witness(label, result),
        classes=result.classes,
        detail=detail,
        seconds=seconds,
    )


def _involutive(
    job: Job,
    name: str,
    kernel: KernelFn,
    groupoid: FiniteGroupoid,
    scale: int,
    twist: Optional[Callable] = None,
    expect: str = PASS,
) -> CheckRecord:
    result, seconds = _timed(
        check_involutive,
        kernel,
        scale,
        twist=twist,
        groupoid=groupoid,
        matrix_cap=job.config.matrix_cap,
        threads=job.threads,
    )
    job.export(kernel, groupoid)
    return involutivity_record(job, name, kernel.action.label, result, seconds, expect)


# suites


def gauss_suite(job: Job) -> List[CheckRecord]:
    ctx, chars = job.ctx, job.chars
    q, p = ctx.q, ctx.p
    records = [
        job.record(
            "crucial-identity",
            PASS if crucial_identity_holds(ctx) else FAIL,
            detail={"identity": "sum psi(s tau) = sum psi(s tau^2)"},
        )
    ]
    if not ctx.odd:
        return records
    square = chars.gauss(1) * chars.gauss(1)
    want = CycNum.from_int(p, int(ctx.quadratic[ctx.neg[1]]) * q)
    records.append(
        job.record(
            "gauss-square",
            PASS if square == want else FAIL,
            expected=str(want),
            computed=str(square),
        )
    )
    minus_two = CycNum.from_int(p, -2)
    bad = [b for b in range(1, q) if chars.kappa(b) + chars.kappa_prime(b) != minus_two]
    records.append(
        job.record(
            "kappa-sum",
            FAIL if bad else PASS,
            expected="-2",
            compared=q - 1,
            witness=f"b = {ctx.format(bad[0])}" if bad else None,
        )
    )
    bad = [b for b in range(1, q) if (chars.kappa(b) - chars.kappa_prime(b)) / 2 != chars.gauss(b)]
    records.append(
        job.record(
            "kappa-difference",
            FAIL if bad else PASS,
            expected="S(alpha_o, psi_b)",
            compared=q - 1,
            witness=f"b = {ctx.format(bad[0])}" if bad else None,
        )
    )
    r = ctx.nonsquare
    bad = [b for b in range(q) if chars.kappa(ctx.mul[r, b]) != chars.kappa_prime(b)]
    records.append(
        job.record(
            "kappa-twist",
            FAIL if bad else PASS,
            compared=q,
            witness=f"b = {ctx.format(bad[0])}" if bad else None,
        )
    )
    return records


def kernels_suite(job: Job) -> List[CheckRecord]:
    ctx, chars = job.ctx, job.chars
    group = job.group
    if group == "quadform":
        return []
    records: List[CheckRecord] = []
    if group == "torus":
        for gid in TORUS_GROUPS:
            for check in torus_oracles(gid, ctx, chars):
                records.append(identity_record(job, check))
            model = torus_stack_points(gid, ctx)
            check, seconds = _timed(torus_stack_extension, model, chars)
            records.append(identity_record(job, check, seconds))
        model = torus_stack_points(GroupId.GL2, ctx)
        records.append(identity_record(job, *_timed(gl2_calT_pullback, model, chars)))
        records.append(identity_record(job, *_timed(calT_table_check, ctx, chars)))
        general, zero_entry = calTsigma_checks(ctx, chars)
        records.append(identity_record(job, general))
        records.append(identity_record(job, zero_entry, finding=True))
        return records

    gid = GroupId(group)
    if gid is GroupId.GL2_CHAR2:
        return [identity_record(job, c) for c in char2_checks(ctx, chars)]
    records.append(identity_record(job, *_timed(restriction_check, gid, ctx, chars)))
    if gid in (GroupId.SL2, GroupId.PGL2):
        records.append(identity_record(job, *_timed(descent_check, gid, ctx, chars)))
    else:
        records.append(identity_record(job, *_timed(gl2_table_general_check, ctx, chars)))
        records.append(negative_record(job, *_timed(non_descent_witness, ctx, chars)))
    return records


def involutivity_suite(job: Job) -> List[CheckRecord]:
    ctx, chars = job.ctx, job.chars
    q = ctx.q
    group = job.group
    records: List[CheckRecord] = []
    if group == "torus":
        for gid in TORUS_GROUPS:
            model = torus_stack_points(gid, ctx)
            kernel = torus_stack_kernel(model, chars).kernel
            records.append(
                _involutive(job, f"t3-{gid.value}", kernel, model.source.groupoid, q**3, t3_twist(ctx))
            )
            result, seconds = _timed(
                phi_calT_involutivity, model, chars, job.config.matrix_cap, job.threads
            )
            expect = FAIL if gid is GroupId.GL2 else PASS
            records.append(
                involutivity_record(
                    job, f"calT-{gid.value}", model.target.action.label, result, seconds, expect
                )
            )
        model = torus_stack_points(GroupId.GL2, ctx)
        records.append(negative_record(job, *_timed(gl2_delta_witness, model, chars)))
        return records

    if group == "quadform":
        return records
    gid = GroupId(group)
    if gid is GroupId.GL2:
        points = enumerate_stack_points(gid, ctx, limit=job.point_limit)
        result, seconds = _timed(
            phi_stack_gl2_involutivity,
            points,
            chars,
            job.config.matrix_cap,
            job.threads,
            exhaustive=q <= GL2_STACK_EXHAUSTIVE_Q,
        )
        records.append(
            involutivity_record(job, "stack-gl2", points.action.label, result, seconds, FAIL)
        )
        return records

    points = enumerate_stack_points(gid, ctx, limit=job.point_limit)
    if gid is GroupId.PGL2:
        kernel = assembled_stack_kernel(points, chars)
    else:
        kernel = stack_kernel(points, chars).kernel
    records.append(_involutive(job, f"stack-{gid.value}", kernel, points.groupoid, q**5))
    if gid is GroupId.SL2:
        twisted = stack_kernel(points, character_twist(ctx)).kernel
        records.append(_involutive(job, "stack-sl2-psi-twist", twisted, points.groupoid, q**5))
    if gid is GroupId.PGL2:
        reduced = enumerate_stack_points(
            gid, ctx, include_twisted_zero=False, limit=job.point_limit
        )
        kernel = stack_kernel(reduced, chars).kernel
        records.append(
            _involutive(
                job, "stack-pgl2-without-twisted-zero", kernel, reduced.groupoid, q**5, expect=FINDING
            )
        )
    return records


def extension_suite(job: Job) -> List[CheckRecord]:
    if job.group in ("torus", "quadform"):
        return []
    gid = GroupId(job.group)
    records = [identity_record(job, *_timed(extension_check, gid, job.ctx, job.chars))]
    if gid in (GroupId.SL2, GroupId.PGL2):
        check, seconds = _timed(
            extension_operator_check, gid, job.ctx, job.chars, threads=job.threads
        )
        records.append(identity_record(job, check, seconds))
    return records


def pushforward_suite(job: Job) -> List[CheckRecord]:
    if job.group != "pgl2":
        return []
    checks, seconds = _timed(pushforward_identities, job.ctx, job.chars)
    return [
        identity_record(job, c, seconds, finding=c.name.endswith("stated-constant"))
        for c in checks
    ]


def quadform_suite(job: Job) -> List[CheckRecord]:
    if job.group != "quadform":
        return []
    ctx, chars = job.ctx, job.chars
    records: List[CheckRecord] = []
    dims = [1, 2] if ctx.q == 3 else [1]
    for m in dims:
        for c in (1, ctx.nonsquare):
            space = QuadSpace(ctx, m, c)
            tag = f"n{space.n}-c{ctx.format(c)}"
            records.append(identity_record(job, check_isotropic_count(space)))
            records.append(identity_record(job, *_timed(check_isotropic_sums, space, chars)))
            records.append(identity_record(job, *_timed(check_weil_sums, space, chars)))
            for check in proof_identities(space, chars):
                records.append(identity_record(job, check))
            result, seconds = _timed(check_theo2, space, chars, job.config.matrix_cap, job.threads)
            records.append(
                involutivity_record(job, f"cone-{tag}", space.format_vector, result, seconds)
            )
    even = EvenQuadSpace(ctx, 1)
    result, seconds = _timed(check_theo2, even, chars, job.config.matrix_cap, job.threads)
    records.append(
        involutivity_record(job, "cone-even-n2", even.format_vector, result, seconds, FAIL)
    )
    if ctx.q <= GL2_MODEL_MAX_Q:
        model, seconds = _timed(gl2_model, ctx, chars, job.config.matrix_cap, job.threads)
        detail = {name: str(ok) for name, ok in model.identities.items()}
        detail["conjugate"] = str(model.conjugate.passed)
        detail["cone"] = str(model.cone.passed)
        detail["multiplicative"] = str(model.multiplicative.passed)
        records.append(
            job.record(
                "gl2-model",
                PASS if model.passed else FAIL,
                expected=f"{ctx.q ** 4} id",
                witness=model.conjugate.witness,
                classes=model.cone.classes,
                detail=detail,
                seconds=seconds,
            )
        )
    return records


SUITES: Dict[str, Callable[[Job], List[CheckRecord]]] = {
    "gauss": gauss_suite,
    "kernels": kernels_suite,
    "involutivity": involutivity_suite,
    "extension": extension_suite,
    "pushforward": pushforward_suite,
    "quadform": quadform_suite,
}


def plan(config: CheckConfig) -> List[Tuple[str, int, str]]:
    return [
        (group, q, suite)
        for group, q in config.jobs()
        for suite in config.selected_checks
    ]


def _run_job(job: Job) -> List[CheckRecord]:
    logger.info("start %s %s q=%d", job.suite, job.group, job.q)
    records, seconds = _timed(SUITES[job.suite], job)
    logger.info("done %s %s q=%d: %d checks in %.2fs", job.suite, job.group, job.q, len(records), seconds)
    for r in records:
        if r.failed:
            logger.warning("%s failed: %s", r.check_id, r.witness)
        elif r.status == FINDING:
            logger.warning("%s: finding recorded (%s)", r.check_id, r.witness)
    return records


def run_checks(config: CheckConfig) -> Report:
    config.validate()
    planned = plan(config)
    outer = min(config.threads, max(1, len(planned)))
    inner = config.threads if outer == 1 else 1
    jobs = []
    moduli: Dict[str, List[int]] = {}
    for group, q, suite in planned:
        ctx = field_for(q)
        moduli[str(q)] = list(ctx.modulus)
        jobs.append(Job(group, q, suite, config, ctx, make_chars(ctx), inner))

    if outer > 1:
        with ThreadPoolExecutor(max_workers=outer) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(job) for job in jobs]

    report = Report(__version__, config.echo(), moduli=moduli)
    for records in results:
        report.records.extend(records)
    return report
