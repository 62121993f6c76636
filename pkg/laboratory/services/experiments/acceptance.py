"""Acceptance suites: one named check per acceptance criterion."""
import logging
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from django.conf import settings

from laboratory.exceptions import NUMERICAL_FAILURES, ConfigurationError, DomainError, RegimeError
from laboratory.services.geometry import BranchAtlas, hausdorff_to_support
from laboratory.services.measures import (
    GFunctionSet, PhiSet, balayage_residual, cauchy_identity_defect, h_identity_defects, masses, mu_B_measure,
    nth_root_diagnostic, period_integrals, phi_sign_structure,
)
from laboratory.services.moments import GAMMA_1, GAMMA_2, MomentCache, verify_moment_by_quadrature
from laboratory.services.mops import MopIndex, counting_measure, interlace_check, real_zeros, solve_mop
from laboratory.services.spectral import find_transition_taus
from laboratory.services.experiments.artifacts import ArtifactWriter
from laboratory.services.experiments.catalog import FigureCatalog
from laboratory.services.experiments.runner import (
    CheckResult, ExperimentConfig, ExperimentReport, geometry_cache, prebuild_moments, run_pool, zero_atoms,
    _index_task,
)

logger = logging.getLogger(__name__)

MASS_TOLERANCE = 1e-8
PERIOD_TOLERANCE = 1e-8
BALAYAGE_TOLERANCE = 1e-6
PAIRING_TOLERANCE = 1e-8
MEASURE_IDENTITY_TOLERANCE = 1e-6
MEASURE_IDENTITIES = ('cauchy', 'h_potential')
HAUSDORFF_FACTOR = 1.5
NTH_ROOT_RATIO = 2.0
MIN_SAMPLES = 10
MOMENT_K_MAX = 20
TRANSITION_TOLERANCES = {'alpha_c': 5e-7, 'tau_c': 5e-7, 'alpha_2': 5e-6}


@dataclass(frozen=True)
class SuiteParameters:
    name: str
    digits: int
    max_N: int
    runtime_budget: float
    alphas: tuple
    weak_limit: tuple
    nth_root: tuple


# (alpha, polynomial, small panel, large panel)
FULL_PAIRS = (
    (Fraction(1, 5), 'P', (6, 24), (12, 48)),
    (Fraction(1, 5), 'A', (6, 24), (12, 48)),
    (Fraction(3, 10), 'B', (9, 21), (18, 42)),
    (Fraction(19, 50), 'B', (19, 31), (38, 62)),
)
FAST_PAIRS = (
    (Fraction(1, 5), 'P', (3, 12), (6, 24)),
    (Fraction(1, 5), 'A', (3, 12), (6, 24)),
    (Fraction(3, 10), 'B', (3, 7), (6, 14)),
    (Fraction(3, 8), 'B', (6, 10), (12, 20)),
)
PROPERTY_ALPHAS = ('0.15', '0.2', '0.3', '0.38')


def suite_parameters(suite):
    if suite == 'primary-all':
        return SuiteParameters(
            name=suite, digits=int(settings.MOPS_LAB['DEFAULT_DIGITS']), max_N=50, runtime_budget=7200,
            alphas=PROPERTY_ALPHAS, weak_limit=FULL_PAIRS, nth_root=FULL_PAIRS,
        )
    if suite == 'fast':
        return SuiteParameters(
            name=suite, digits=200, max_N=30, runtime_budget=900,
            alphas=PROPERTY_ALPHAS, weak_limit=FAST_PAIRS, nth_root=FAST_PAIRS,
        )
    raise ConfigurationError(f"unknown acceptance suite {suite!r}", setting='suite')


def _fmt(value):
    return None if value is None else f"{float(value):.6e}"


class AcceptanceSuite:
    """Runs the acceptance checks of one suite and collects them into an ExperimentReport."""

    def __init__(self, suite, jobs=None, output_dir=None, catalog=None):
        self.params = suite_parameters(suite)
        self.config = ExperimentConfig.from_settings(
            f"acceptance_{suite}", digits=self.params.digits, jobs=jobs, output_dir=output_dir,
        )
        self.ctx = self.config.ctx
        self.catalog = catalog or FigureCatalog()
        self.report = ExperimentReport(
            experiment_id=self.config.experiment_id,
            inputs={'suite': suite, 'digits': self.params.digits, 'max_N': self.params.max_N,
                    'alphas': list(self.params.alphas)},
        )
        self._geometry = {}
        self._gsets = {}
        self._solutions = {}

    # shared stages

    def supports(self, alpha):
        if alpha not in self._geometry:
            found, failures = geometry_cache([alpha], self.ctx)
            if failures:
                raise RegimeError(failures[0]['error'], alpha=str(alpha))
            self._geometry[alpha] = found[alpha]
        return self._geometry[alpha]

    def gset(self, alpha):
        if alpha not in self._gsets:
            self._gsets[alpha] = GFunctionSet(self.supports(alpha))
        return self._gsets[alpha]

    def solution(self, n, m):
        key = (n, m)
        if key not in self._solutions:
            self._solutions[key] = solve_mop(MopIndex(n=n, m=m), self.ctx, cache=MomentCache())
        return self._solutions[key]

    def _guarded(self, name, check):
        try:
            result = check()
        except NUMERICAL_FAILURES + (RegimeError, DomainError) as e:
            logger.error(f"acceptance check {name} aborted: {str(e)}")
            self.report.failures.append({'check': name, 'error': str(e)})
            result = CheckResult(name=name, passed=False, detail={'error': str(e)})
        return self.report.add(result)

    def run(self):
        started = time.monotonic()
        checks = (
            ('transition_constants', self.check_transition_constants),
            ('mass_constraints', self.check_mass_constraints),
            ('periods', self.check_periods),
            ('moment_oracle', self.check_moment_oracle),
            ('mop_orthogonality', self.check_mop_orthogonality),
            ('weak_limit_geometry', self.check_weak_limit_geometry),
            ('nth_root_asymptotics', self.check_nth_root),
            ('balayage', self.check_balayage),
            ('interlacing', self.check_interlacing),
            ('property_suites', self.check_properties),
        )
        for name, check in checks:
            logger.info(f"acceptance {self.params.name}: running {name}")
            self._guarded(name, check)
        elapsed = time.monotonic() - started
        self.report.add(CheckResult(
            name='suite_runtime', passed=elapsed <= self.params.runtime_budget,
            measured=f"{elapsed:.1f}", tolerance=f"{self.params.runtime_budget:.0f}",
        ))
        self.report.wall_time = elapsed
        writer = ArtifactWriter(self.config.experiment_id, self.config.output_dir)
        path = writer.store.resolve('report.json')
        self.report.files = [path]
        writer.json('report.json', self.report.as_dict())
        return self.report

    # individual criteria

    def check_transition_constants(self):
        computed = find_transition_taus(self.ctx, which=('tau_c', 'tau2'))
        reference = settings.MOPS_LAB['REFERENCE_TRANSITIONS']
        values = {'alpha_c': computed.alpha_c, 'tau_c': computed.tau_c, 'alpha_2': computed.alpha_2}
        errors = {k: abs(float(values[k]) - float(reference[k])) for k in TRANSITION_TOLERANCES}
        return CheckResult(
            name='transition_constants',
            passed=all(errors[k] <= tol for k, tol in TRANSITION_TOLERANCES.items()),
            measured=_fmt(max(errors.values())),
            tolerance=_fmt(min(TRANSITION_TOLERANCES.values())),
            detail={k: f"{float(v):.10f}" for k, v in values.items()},
        )

    def check_mass_constraints(self):
        worst, detail = 0.0, {}
        for alpha in self.params.alphas:
            supports = self.supports(alpha)
            gctx = supports.curve.ctx
            result = masses(supports.curve, supports, gctx)
            residuals = {k: float(v) for k, v in result.constraint_residuals(supports.curve.alpha).items()}
            if supports.regime != 'subcritical':
                residuals['|mu_B|=1-alpha'] = float(abs(mu_B_measure(supports, gctx).total_mass - (1 - supports.curve.alpha)))
            detail[alpha] = {k: _fmt(v) for k, v in residuals.items()}
            worst = max(worst, *residuals.values())
        return CheckResult(
            name='mass_constraints', passed=worst <= MASS_TOLERANCE, measured=_fmt(worst),
            tolerance=_fmt(MASS_TOLERANCE), detail=detail,
        )

    def check_periods(self):
        worst, detail = 0.0, {}
        for alpha in self.params.alphas:
            curve = self.supports(alpha).curve
            periods = period_integrals(curve, curve.ctx)
            residual = max(float(r) for r in periods.residuals)
            detail[alpha] = {'residual': _fmt(residual), 'closed': periods.closed}
            worst = max(worst, residual if periods.closed else float('inf'))
        return CheckResult(
            name='periods', passed=worst <= PERIOD_TOLERANCE, measured=_fmt(worst),
            tolerance=_fmt(PERIOD_TOLERANCE), detail=detail,
        )

    def check_moment_oracle(self):
        contours = {c.label: c for c in (GAMMA_1, GAMMA_2)}
        for spec in (self.catalog.get(f) for f in self.catalog):
            for contour in (spec.contour_n, spec.contour_m):
                if contour is not None:
                    contours.setdefault(contour.label, contour)
        tolerance = self.ctx.tol(2)
        worst = self.ctx.mp.mpf(0)
        detail = {}
        for label, contour in sorted(contours.items()):
            residual = max(verify_moment_by_quadrature(contour, k, self.ctx) for k in range(MOMENT_K_MAX + 1))
            detail[label] = self.ctx.mp.nstr(residual, 5)
            worst = max(worst, residual)
        return CheckResult(
            name='moment_oracle', passed=worst <= tolerance, measured=self.ctx.mp.nstr(worst, 5),
            tolerance=self.ctx.mp.nstr(tolerance, 5), detail=detail,
        )

    def _catalog_solves(self):
        indices = self.catalog.indices(max_N=self.params.max_N)
        prebuild_moments(indices, self.ctx)
        tasks = [_index_task(index, self.config) for index in indices]
        return indices, run_pool(tasks, self.config.jobs, 'catalog solves')

    def check_mop_orthogonality(self):
        indices, results = self._catalog_solves()
        self._catalog_results = results
        failed, singular = [], []
        for index in indices:
            out = results[index.label]
            if out['error']:
                failed.append(index.label)
                continue
            if not all(out['exists'].values()):
                singular.append(index.label)
            if not out['residual_ok']:
                failed.append(index.label)
        return CheckResult(
            name='mop_orthogonality', passed=not failed and not singular, measured=str(len(failed) + len(singular)),
            tolerance='0', detail={'solved': len(indices), 'failed': failed, 'singular': singular},
        )

    def _rescaled_zeros(self, n, m, which):
        solution = self.solution(n, m)
        poly = {'P': solution.P, 'A': solution.A, 'B': solution.B}[which]
        if poly is None or poly.degree < 1:
            return []
        return counting_measure(poly, n + m, self.ctx).points()

    def check_weak_limit_geometry(self):
        pieces = {'P': ('delta1', 'delta2'), 'A': ('delta1', 'delta3'), 'B': ('E_alpha',)}
        ratios, detail = [], {}
        for alpha, which, small, large in self.params.weak_limit:
            supports = self.supports(alpha)
            d_small = hausdorff_to_support(self._rescaled_zeros(*small, which), supports, pieces[which])
            d_large = hausdorff_to_support(self._rescaled_zeros(*large, which), supports, pieces[which])
            ratio = d_small / d_large if d_large > 0 else float('inf')
            ratios.append(ratio)
            detail[f"{which}@{alpha}"] = {'small': _fmt(d_small), 'large': _fmt(d_large), 'ratio': _fmt(ratio)}
        worst = min(ratios)
        return CheckResult(
            name='weak_limit_geometry', passed=worst >= HAUSDORFF_FACTOR, measured=_fmt(worst),
            tolerance=_fmt(HAUSDORFF_FACTOR), detail=detail,
        )

    def sample_points(self, supports, which, count=12):
        """Off-support points on two circles, plus points of Omega_alpha for B."""
        points = []
        for radius in (1.4, 2.2):
            for k in range(16):
                points.append(radius * np.exp(1j * (2 * np.pi * k / 16 + 0.1)))
        if which == 'B' and supports.omega_boundary:
            boundary = np.array([complex(z) for z in supports.omega_boundary])
            xs = np.linspace(boundary.real.min(), boundary.real.max(), 9)
            ys = np.linspace(boundary.imag.min(), boundary.imag.max(), 9)
            inside = [complex(x, y) for x in xs for y in ys if supports.point_in_omega(complex(x, y))]
            points = inside + points
        return points, count

    def check_nth_root(self):
        ratios, detail = [], {}
        for alpha, which, small, large in self.params.nth_root:
            gset = self.gset(alpha)
            candidates, count = self.sample_points(gset.supports, which)
            constants = []
            for n, m in (small, large):
                mop = self.solution(n, m)
                usable = []
                for z in candidates:
                    try:
                        frame = nth_root_diagnostic(mop, which, [z], gset)
                    except DomainError:
                        continue
                    usable.append(frame)
                    if len(usable) >= count:
                        break
                if len(usable) < MIN_SAMPLES:
                    raise DomainError(f"only {len(usable)} usable sample points for {which} at alpha={alpha}")
                deviations = np.concatenate([f['deviation'].to_numpy() for f in usable])
                regions = sorted({r for f in usable for r in f['region']})
                constants.append(float(np.max(np.abs(deviations))) * (n + m))
            ratio = constants[0] / constants[1] if constants[1] > 0 else float('inf')
            ratios.append(ratio)
            detail[f"{which}@{alpha}"] = {'C_small': _fmt(constants[0]), 'C_large': _fmt(constants[1]), 'regions': regions}
        worst = max(max(r, 1 / r) if r > 0 else float('inf') for r in ratios)
        return CheckResult(
            name='nth_root_asymptotics', passed=worst <= NTH_ROOT_RATIO, measured=_fmt(worst),
            tolerance=_fmt(NTH_ROOT_RATIO), detail=detail,
        )

    def check_balayage(self):
        worst, detail = 0.0, {}
        for alpha in ('0.3', '0.38'):
            supports = self.supports(alpha)
            residual = balayage_residual(supports.curve, supports, supports.curve.ctx)
            detail[alpha] = _fmt(residual)
            worst = max(worst, residual)
        return CheckResult(
            name='balayage', passed=worst <= BALAYAGE_TOLERANCE, measured=_fmt(worst),
            tolerance=_fmt(BALAYAGE_TOLERANCE), detail=detail,
        )

    def check_interlacing(self):
        results = getattr(self, '_catalog_results', None)
        if results is None:
            _, results = self._catalog_solves()
        flagged, detail = [], {}
        for figure_id in self.catalog:
            spec = self.catalog.get(figure_id)
            if not spec.interlacing:
                continue
            for index in spec.indices():
                out = results.get(index.label)
                if out is None or out['error'] or index.N > self.params.max_N:
                    continue
                window = self.supports(index.alpha_N).delta1
                zeros = {
                    k: [z for z, mult in zero_atoms(v, self.ctx) for _ in range(mult)] for k, v in out['zeros'].items()
                }
                report = interlace_check(
                    [float(x) for x in real_zeros(zeros.get('A', []), self.ctx)],
                    [float(x) for x in real_zeros(zeros.get('P', []), self.ctx)],
                    (float(window[0]), float(window[1])),
                )
                detail[index.label] = 'vacuous' if report.vacuous else ('holds' if report.holds else 'violated')
                if not report.holds:
                    flagged.append(index.label)
        return CheckResult(
            name='interlacing', passed=not flagged, flag_only=True, measured=str(len(flagged)), detail=detail,
        )

    def check_properties(self):
        worst, detail = 0.0, {}
        for alpha in self.params.alphas:
            supports = self.supports(alpha)
            values = property_defects(supports)
            detail[alpha] = {k: (_fmt(v) if k != 'phi_sign' else v) for k, v in values.items()}
            # measured as a multiple of each defect's own tolerance
            numeric = [v / property_tolerance(k) for k, v in values.items() if k != 'phi_sign']
            worst = max(worst, *numeric)
            if values['phi_sign'] != 'ok':
                worst = float('inf')
        return CheckResult(
            name='property_suites', passed=worst <= 1, measured=_fmt(worst), tolerance=_fmt(1), detail=detail,
        )


def property_tolerance(name):
    return MEASURE_IDENTITY_TOLERANCE if name in MEASURE_IDENTITIES else PAIRING_TOLERANCE


def property_defects(supports, samples=8):
    """Branch, trajectory, Cauchy-transform and H-function defects at one alpha, plus the Phi sign verdict."""
    curve = supports.curve
    ctx = curve.ctx
    mp = ctx.mp
    atlas = BranchAtlas(supports, ctx)
    points = [mp.mpc(1.7 * np.cos(t), 1.7 * np.sin(t)) for t in np.linspace(0.2, 2 * np.pi - 0.1, samples)]
    symmetric = max(float(atlas.labels(z).symmetric_residual(curve)) for z in points)
    conjugation = 0.0
    for z in points:
        upper, lower = atlas.labels(z), atlas.labels(z.conjugate())
        conjugation = max(conjugation, max(float(abs(a.conjugate() - b)) for a, b in zip(upper.xi, lower.xi)))

    pairing = 0.0
    lo, hi = supports.delta1
    pairing = max(pairing, float(atlas.boundary_pairing_defect((lo + hi) / 2, 1j, (0, 1))))
    if supports.delta3:
        lo, hi = supports.delta3
        pairing = max(pairing, float(atlas.boundary_pairing_defect((lo + hi) / 2, 1j, (1, 2))))
    nodes = supports.delta2_lower.nodes
    k = len(nodes) // 2
    tangent = nodes[k + 1] - nodes[k - 1]
    pairing = max(pairing, float(atlas.boundary_pairing_defect(nodes[k], 1j * tangent / abs(tangent), (0, 2))))

    arcs = [supports.delta2] + [a for a in (supports.gamma_L, supports.gamma_R) if a is not None]
    trajectory = max(float(a.trajectory_defect()) for a in arcs)

    gset = GFunctionSet(supports)
    signs = phi_sign_structure(PhiSet(gset))
    phi_sign = 'ok' if all(v < 0 for v in signs.values()) else f"max Re Phi {max(float(v) for v in signs.values()):.3e}"
    outer = points + [z * mp.mpf('1.5') for z in points]
    h_potential, h_max = h_identity_defects(gset, mu_B_measure(supports, ctx), outer)
    return {
        'symmetric_functions': symmetric,
        'conjugation': conjugation,
        'boundary_pairing': pairing,
        'trajectory': trajectory,
        'cauchy': cauchy_identity_defect(supports, atlas, outer, ctx),
        'h_potential': h_potential,
        'h_max': h_max,
        'phi_sign': phi_sign,
    }


def run_acceptance(suite, jobs=None, output_dir=None):
    return AcceptanceSuite(suite, jobs=jobs, output_dir=output_dir).run()
