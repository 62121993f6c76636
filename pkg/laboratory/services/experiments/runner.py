import logging
import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field

from django.conf import settings
from tqdm import tqdm

from laboratory.exceptions import NUMERICAL_FAILURES, ConfigurationError, RegimeError
from laboratory.services.geometry import geometry_for, hausdorff_to_support
from laboratory.services.moments import MomentCache, RayPairContour
from laboratory.services.mops import MopIndex, counting_measure, interlace_check, real_zeros, solve_mop
from laboratory.services.numerics import PrecisionCtx
from laboratory.services.experiments.artifacts import ArtifactWriter, tagged_number
from laboratory.services.experiments.catalog import FigureCatalog
from laboratory.utils.json_io import complex_record, parse_complex

logger = logging.getLogger(__name__)

MIN_DIGITS_ABOVE_20 = 100
HAUSDORFF_PIECES = {
    'P': ('delta1', 'delta2'),
    'A': ('delta1', 'delta3'),
    'B': ('E_alpha',),
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment_id: str
    digits: int
    guard_digits: int = 20
    output_dir: str = None
    jobs: int = 1
    formats: tuple = ('json', 'csv', 'svg')
    hausdorff: bool = True
    interlacing: bool = True

    def __post_init__(self):
        if self.jobs < 1:
            raise ConfigurationError(f"jobs must be >= 1, got {self.jobs}", setting='jobs')
        unknown = set(self.formats) - {'json', 'csv', 'svg'}
        if unknown:
            raise ConfigurationError(f"unknown output formats {sorted(unknown)}", setting='format')

    @classmethod
    def from_settings(cls, experiment_id, digits=None, **overrides):
        config = settings.MOPS_LAB
        return cls(
            experiment_id=experiment_id,
            digits=int(digits or config['DEFAULT_DIGITS']),
            guard_digits=int(config['GUARD_DIGITS']),
            output_dir=overrides.pop('output_dir', None) or config['OUTPUT_DIR'],
            jobs=int(overrides.pop('jobs', None) or config['JOBS']),
            **overrides,
        )

    @property
    def ctx(self):
        return PrecisionCtx(digits=self.digits, guard_digits=self.guard_digits)

    def require_digits_for(self, N):
        if N > 20 and self.digits < MIN_DIGITS_ABOVE_20:
            raise ConfigurationError(
                f"N={N} needs at least {MIN_DIGITS_ABOVE_20} digits, got {self.digits}", setting='digits'
            )


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: str = None
    tolerance: str = None
    flag_only: bool = False
    detail: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            'name': self.name,
            'passed': self.passed,
            'measured': self.measured,
            'tolerance': self.tolerance,
            'flag_only': self.flag_only,
            'detail': self.detail,
        }


@dataclass
class ExperimentReport:
    experiment_id: str
    inputs: dict
    checks: list = field(default_factory=list)
    wall_time: float = 0.0
    files: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def add(self, check):
        self.checks.append(check)
        level = logging.INFO if check.passed or check.flag_only else logging.WARNING
        logger.log(level, f"{self.experiment_id}: check {check.name} {'passed' if check.passed else 'FAILED'}")
        return check

    def check(self, name):
        return next(c for c in self.checks if c.name == name)

    @property
    def passed(self):
        return all(c.passed for c in self.checks if not c.flag_only)

    @property
    def exit_code(self):
        """0 all pass, 1 a check failed, 3 a numerical failure was recorded."""
        if self.failures:
            return 3
        return 0 if self.passed else 1

    def as_dict(self):
        return {
            'experiment_id': self.experiment_id,
            'inputs': self.inputs,
            'checks': [c.as_dict() for c in self.checks],
            'failures': self.failures,
            'passed': self.passed,
            'files': sorted(self.files),
            'wall_time_seconds': round(self.wall_time, 3),
        }


def _index_task(index, config):
    return {
        'n': index.n,
        'm': index.m,
        'K': index.K,
        'contour_n': (index.contour_n.ell, index.contour_n.kappa),
        'contour_m': (index.contour_m.ell, index.contour_m.kappa),
        'digits': config.digits,
        'guard_digits': config.guard_digits,
        'cache_dir': str(settings.MOPS_LAB['CACHE_DIR']),
    }


def zero_atoms(records, ctx):
    """(z, multiplicity) pairs from the zero records of a solved panel."""
    return [(parse_complex(r, ctx), r.get('multiplicity', 1)) for r in records]


def solve_panel(task):
    """Worker: solve one (n, m) and return its rescaled zeros as decimal strings with multiplicities."""
    ctx = PrecisionCtx(digits=task['digits'], guard_digits=task['guard_digits'])
    K = task['K']
    index = MopIndex(
        n=task['n'], m=task['m'], K=K,
        contour_n=RayPairContour(K, *task['contour_n']), contour_m=RayPairContour(K, *task['contour_m']),
    )
    result = {'label': index.label, 'n': index.n, 'm': index.m, 'zeros': {}, 'error': None}
    try:
        solution = solve_mop(index, ctx, cache=MomentCache(task['cache_dir']))
    except NUMERICAL_FAILURES as e:
        logger.error(f"solve failed for {index.label}: {str(e)}")
        result['error'] = str(e)
        return result
    for name, poly in solution.polynomials().items():
        if poly.degree < 1:
            result['zeros'][name] = []
            continue
        atoms = counting_measure(poly, index.N, ctx, K=K).atoms
        result['zeros'][name] = [dict(complex_record(z, ctx, ctx.digits), multiplicity=mult) for z, mult in atoms]
    result['exists'] = {'typeI': solution.type_I_exists, 'typeII': solution.type_II_exists}
    result['conditioning'] = solution.conditioning.as_dict(ctx)
    result['residuals'] = {k: ctx.mp.nstr(v, 8) for k, v in solution.conditioning.residuals.items()}
    residuals = list(solution.conditioning.residuals.values())
    result['max_residual'] = ctx.mp.nstr(max(residuals), 8) if residuals else None
    result['residual_ok'] = bool(residuals) and all(v <= ctx.tol(2) for v in residuals)
    return result


def run_pool(tasks, jobs, desc):
    """Run ``solve_panel`` over tasks, in-process for one job, else on a forked process pool."""
    results = {}
    if jobs == 1 or len(tasks) <= 1:
        for task in tqdm(tasks, desc=desc, disable=len(tasks) <= 1):
            out = solve_panel(task)
            results[out['label']] = out
        return results
    with ProcessPoolExecutor(max_workers=jobs, mp_context=multiprocessing.get_context('fork')) as ex:
        futures = [ex.submit(solve_panel, task) for task in tasks]
        for fut in tqdm(as_completed(futures), total=len(futures), desc=desc):
            out = fut.result()
            results[out['label']] = out
    return results


def prebuild_moments(indices, ctx, cache=None):
    """Moment tables for every contour used, deep enough for the largest N (one writer per file)."""
    cache = cache or MomentCache()
    depth = {}
    for index in indices:
        for contour in (index.contour_n, index.contour_m):
            depth[contour] = max(depth.get(contour, 0), 2 * index.N - 1)
    for contour, k_max in depth.items():
        cache.load_or_build(contour, k_max, ctx)
    return cache


def geometry_cache(alphas, ctx):
    """Supports with E_alpha for each alpha; failures are recorded, not raised."""
    out, failures = {}, []
    for alpha in alphas:
        try:
            out[alpha] = geometry_for(alpha, ctx)
        except NUMERICAL_FAILURES + (RegimeError,) as e:
            logger.error(f"geometry failed at alpha={alpha}: {str(e)}")
            failures.append({'alpha': str(alpha), 'error': str(e)})
    return out, failures


def support_polylines(supports, pieces):
    arcs = {}
    for piece in pieces:
        if piece in ('delta1', 'delta3'):
            interval = getattr(supports, piece)
            if interval:
                arcs[piece] = [[complex(interval[0]), complex(interval[1])]]
        elif piece == 'delta2':
            arcs[piece] = [[complex(z) for z in supports.delta2.nodes]]
        elif piece == 'E_alpha':
            arcs[piece] = [[complex(z) for z in arc.nodes] for arc in supports.E_alpha]
    return arcs


def _hausdorff_checks(report, label, zeros, supports, polynomials):
    measured = {}
    for name in polynomials:
        points = zeros.get(name)
        if name not in HAUSDORFF_PIECES or not points:
            continue
        measured[name] = hausdorff_to_support(points, supports, HAUSDORFF_PIECES[name])
    if measured:
        report.add(CheckResult(
            name=f"{label}:hausdorff", passed=True, flag_only=True,
            measured=repr(max(measured.values())), detail={k: repr(v) for k, v in measured.items()},
        ))


def run_figure(figure_id, config=None, catalog=None):
    """Solve every panel of a catalogued figure and write zeros, overlays and the report."""
    started = time.monotonic()
    catalog = catalog or FigureCatalog()
    spec = catalog.get(figure_id)
    config = config or ExperimentConfig.from_settings(figure_id)
    ctx = config.ctx
    writer = ArtifactWriter(figure_id.replace('=', ''), config.output_dir)
    report = ExperimentReport(
        experiment_id=figure_id,
        inputs={
            'figure_id': figure_id, 'K': spec.K, 'digits': config.digits,
            'panels': [list(p) for p in spec.panels], 'alphas': list(spec.alphas),
        },
    )

    if spec.kind == 'supports':
        _run_supports(spec, config, writer, report)
    else:
        _run_zeros(spec, config, writer, report)

    report.wall_time = time.monotonic() - started
    report.files = list(writer.manifest)
    if 'json' in config.formats:
        report.files.append(writer.store.resolve('report.json'))
        writer.json('report.json', report.as_dict())
    logger.info(f"{figure_id} finished in {report.wall_time:.1f}s with exit code {report.exit_code}")
    return report


def _run_zeros(spec, config, writer, report):
    ctx = config.ctx
    indices = spec.indices()
    config.require_digits_for(spec.max_N)
    prebuild_moments(indices, ctx)
    results = run_pool([_index_task(index, config) for index in indices], config.jobs, spec.figure_id)

    supports_by_alpha = {}
    if spec.overlay and config.hausdorff:
        supports_by_alpha, failures = geometry_cache(sorted(set(spec.panel_alphas())), ctx)
        report.failures.extend(failures)

    for index in indices:
        out = results[index.label]
        label = f"n{index.n}_m{index.m}"
        if out['error']:
            report.failures.append({'panel': label, 'error': out['error']})
            report.add(CheckResult(name=f"{label}:exists", passed=False, flag_only=True, detail={'error': out['error']}))
            continue
        atoms = {name: zero_atoms(records, ctx) for name, records in out['zeros'].items()}
        zeros = {name: [z for z, mult in pairs for _ in range(mult)] for name, pairs in atoms.items()}
        shown = {name: zeros[name] for name in spec.polynomials if name in zeros}
        report.add(CheckResult(
            name=f"{label}:exists", passed=all(out['exists'].values()), flag_only=True, detail=out['exists'],
        ))
        report.add(CheckResult(
            name=f"{label}:orthogonality", passed=out['residual_ok'],
            measured=out['max_residual'], tolerance=f"1e-{config.digits // 2}",
            detail=out['conditioning'],
        ))
        supports = supports_by_alpha.get(index.alpha_N)
        if supports is not None:
            _hausdorff_checks(report, label, zeros, supports, spec.polynomials)
        if spec.interlacing and config.interlacing and 'A' in zeros and 'P' in zeros:
            window = supports.delta1 if supports is not None else None
            window = (float(window[0]), float(window[1])) if window else None
            check = interlace_check(
                [float(x) for x in real_zeros(zeros['A'], ctx)], [float(x) for x in real_zeros(zeros['P'], ctx)], window,
            )
            report.add(CheckResult(
                name=f"{label}:interlacing", passed=check.holds, flag_only=True,
                detail={'vacuous': check.vacuous, 'violations': [str(v) for v in check.violations]},
            ))
        if 'csv' in config.formats:
            writer.zeros_csv(f"{label}_zeros.csv", {name: atoms[name] for name in shown}, ctx)
        if 'svg' in config.formats:
            arcs = support_polylines(supports, spec.overlay) if supports is not None else {}
            writer.overlay_svg(f"{label}.svg", f"{spec.title}: (n,m)=({index.n},{index.m})", shown, arcs)


def _run_supports(spec, config, writer, report):
    ctx = config.ctx
    supports_by_alpha, failures = geometry_cache(list(spec.alphas), ctx)
    report.failures.extend(failures)
    for alpha, supports in supports_by_alpha.items():
        gctx = supports.curve.ctx
        label = f"alpha_{alpha}"
        split = supports.a_star > supports.curve.a1
        report.add(CheckResult(
            name=f"{label}:topology", passed=True, flag_only=True,
            measured='a_star in (a1, b1)' if split else 'a_star < a1',
            detail={'regime': supports.regime, 'a_star': tagged_number(supports.a_star, gctx)},
        ))
        arcs = support_polylines(supports, spec.overlay)
        if 'json' in config.formats:
            writer.json(f"{label}_supports.json", {
                'alpha': alpha,
                'curve': supports.curve.as_dict(),
                'a_star': tagged_number(supports.a_star, gctx),
                'arcs': {
                    piece: [[complex_record(z, gctx) for z in line] for line in lines]
                    for piece, lines in support_polylines(supports, ('delta1', 'delta2', 'delta3', 'E_alpha')).items()
                },
            })
        if 'svg' in config.formats:
            writer.overlay_svg(f"{label}.svg", f"{spec.title}: alpha={alpha}", {}, arcs)
