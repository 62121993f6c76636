import logging
from dataclasses import dataclass, field
from fractions import Fraction

from laboratory.exceptions import DomainError, SingularMatrixError
from laboratory.services.moments import GAMMA_1, GAMMA_2, MomentTable, RayPairContour
from laboratory.services.numerics import ComplexMatrix, ComplexPoly, poly_roots, solve_linear

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MopIndex:
    """Degrees (n, m) with the two ray-pair contours carrying the weight e^{-z^K}."""
    n: int
    m: int
    K: int = 3
    contour_n: RayPairContour = None
    contour_m: RayPairContour = None

    def __post_init__(self):
        if self.n < 0 or self.m < 0:
            raise DomainError(f"degrees must be nonnegative, got ({self.n}, {self.m})")
        if self.n + self.m < 1:
            raise DomainError("N = n + m must be at least 1")
        if self.contour_n is None or self.contour_m is None:
            if self.K != 3:
                raise DomainError(f"K={self.K} needs explicit contours", value=self.K)
            object.__setattr__(self, 'contour_n', self.contour_n or GAMMA_1)
            object.__setattr__(self, 'contour_m', self.contour_m or GAMMA_2)
        for contour in (self.contour_n, self.contour_m):
            if contour.K != self.K:
                raise DomainError(f"contour {contour.label} does not match K={self.K}", value=contour.K)
        if {self.contour_n.ell, self.contour_n.kappa} == {self.contour_m.ell, self.contour_m.kappa}:
            raise DomainError("the two contours use the same pair of rays")

    @property
    def N(self):
        return self.n + self.m

    @property
    def alpha_N(self):
        return Fraction(self.n, self.N)

    @property
    def label(self):
        return f"n{self.n}_m{self.m}_{self.contour_n.label}_{self.contour_m.label}"


@dataclass(frozen=True)
class ConditioningReport:
    pivot_min: object = None
    pivot_max: object = None
    singular_step: int = None
    residuals: dict = field(default_factory=dict)

    @property
    def pivot_ratio(self):
        if self.pivot_min is None or not self.pivot_max:
            return None
        return self.pivot_min / self.pivot_max

    def as_dict(self, ctx):
        fmt = lambda v: None if v is None else ctx.mp.nstr(v, 8)
        return {
            'pivot_min': fmt(self.pivot_min),
            'pivot_max': fmt(self.pivot_max),
            'pivot_ratio': fmt(self.pivot_ratio),
            'singular_step': self.singular_step,
            'residuals': {name: fmt(value) for name, value in self.residuals.items()},
        }


@dataclass(frozen=True)
class MopSolution:
    index: MopIndex
    P: ComplexPoly = None
    A: ComplexPoly = None
    B: ComplexPoly = None
    type_I_exists: bool = False
    type_II_exists: bool = False
    conditioning: ConditioningReport = None

    @property
    def names(self):
        """Names used for (P, A, B); the general-K family is written Q, C, D."""
        return ('P', 'A', 'B') if self.index.K == 3 else ('Q', 'C', 'D')

    def polynomials(self):
        out = {}
        for name, poly in zip(self.names, (self.P, self.A, self.B)):
            if poly is not None:
                out[name] = poly
        return out


@dataclass(frozen=True)
class OrthogonalityResidual:
    conditions: object
    normalization: object

    @property
    def value(self):
        return max(self.conditions, self.normalization)


@dataclass(frozen=True)
class CountingMeasure:
    """(1/N) sum of point masses at the rescaled zeros."""
    atoms: tuple
    normalizer: int

    @property
    def total_mass(self):
        return Fraction(sum(mult for _, mult in self.atoms), self.normalizer)

    def points(self):
        return [z for z, mult in self.atoms for _ in range(mult)]

    def integrate(self, f):
        return sum(mult * f(z) for z, mult in self.atoms) / self.normalizer


@dataclass(frozen=True)
class InterlacingReport:
    holds: bool
    violations: tuple = ()
    count_a: int = 0
    count_p: int = 0
    vacuous: bool = False

    @property
    def first_violation(self):
        return self.violations[0] if self.violations else None


def moment_tables(index, ctx, cache=None, k_max=None):
    """Moment tables for both contours, deep enough for both solves."""
    k_max = 2 * index.N - 1 if k_max is None else k_max
    if cache is not None:
        return cache.load_or_build(index.contour_n, k_max, ctx), cache.load_or_build(index.contour_m, k_max, ctx)
    return MomentTable.build(index.contour_n, k_max, ctx), MomentTable.build(index.contour_m, k_max, ctx)


def build_mixed_moment_matrix(index, ctx, tables=None):
    """H with H[i][j] = f1^(i+j) for j < n and f2^(i+j-n) for j >= n."""
    f1, f2 = tables or moment_tables(index, ctx)
    n, N = index.n, index.N
    f1.require(2 * N - 2 if n else 0)
    f2.require(2 * N - 2 if index.m else 0)
    rows = [[f1[i + j] if j < n else f2[i + j - n] for j in range(N)] for i in range(N)]
    return ComplexMatrix.from_rows(rows, ctx)


def _split_type_I(index, x, ctx):
    A = ComplexPoly(tuple(x[:index.n]), ctx) if index.n else None
    B = ComplexPoly(tuple(x[index.n:]), ctx) if index.m else None
    return A, B


def solve_type_I(index, ctx, tables=None, matrix=None):
    """(A, B) with H (a; b) = e_N: all conditions vanish except z^(N-1)."""
    tables = tables or moment_tables(index, ctx)
    H = matrix or build_mixed_moment_matrix(index, ctx, tables)
    rhs = [0] * (index.N - 1) + [1]
    solution = solve_linear(H, rhs, ctx)
    A, B = _split_type_I(index, solution.x, ctx)
    logger.debug(f"type I solved for {index.label}")
    return A, B, solution


def _type_II_system(index, ctx, tables):
    f1, f2 = tables
    N = index.N
    if index.n:
        f1.require(2 * N - 1)
    if index.m:
        f2.require(2 * N - 1)
    rows, rhs = [], []
    for table, count in ((f1, index.n), (f2, index.m)):
        for j in range(count):
            rows.append([table[j + k] for k in range(N)])
            rhs.append(-table[j + N])
    return rows, rhs


def solve_type_II(index, ctx, tables=None, row_order=None):
    """Monic P of degree N from the transposed system with z^N moved right."""
    tables = tables or moment_tables(index, ctx)
    rows, rhs = _type_II_system(index, ctx, tables)
    if row_order is not None:
        rows = [rows[i] for i in row_order]
        rhs = [rhs[i] for i in row_order]
    solution = solve_linear(ComplexMatrix.from_rows(rows, ctx), rhs, ctx)
    P = ComplexPoly(tuple(solution.x) + (1,), ctx)
    logger.debug(f"type II solved for {index.label}")
    return P, solution


def _row_sums(coeff_groups, count, tables, ctx):
    """sum_j c_j f^(i+j) over both weights, for i < count, with the matching scales."""
    mp = ctx.mp
    values, scales = [], []
    for i in range(count):
        terms = []
        for coeffs, table in zip(coeff_groups, tables):
            if not coeffs:
                continue
            table.require(i + len(coeffs) - 1)
            terms.extend(c * table[i + j] for j, c in enumerate(coeffs))
        values.append(mp.fsum(terms) if terms else mp.mpc(0))
        scales.append(mp.fsum(abs(t) for t in terms) if terms else mp.mpf(0))
    return values, scales


def orthogonality_residual(poly, index, which, ctx, tables=None):
    """Defining conditions re-evaluated from the stored moments.

    ``which='typeII'`` takes P; ``which='typeI'`` takes the pair (A, B).
    Condition residuals are relative to the size of the summed terms; the
    normalization residual measures monicity (type II) or the z^(N-1) row
    (type I).
    """
    mp = ctx.mp
    tables = tables or moment_tables(index, ctx)
    tiny = mp.mpf(10) ** (-(ctx.digits + ctx.guard_digits))
    if which == 'typeII':
        coeffs = list(poly.coeffs)
        rows = []
        for table, count in zip(tables, (index.n, index.m)):
            values, scales = _row_sums([coeffs], count, [table], ctx)
            rows.extend(abs(v) / max(s, tiny) for v, s in zip(values, scales))
        if poly.is_zero:
            normalization = mp.mpf(1)
        elif poly.degree != index.N:
            normalization = mp.inf
        else:
            normalization = abs(poly.leading - 1)
        return OrthogonalityResidual(conditions=max(rows, default=mp.mpf(0)), normalization=normalization)
    if which == 'typeI':
        A, B = poly
        groups = [list(A.coeffs) if A is not None else [], list(B.coeffs) if B is not None else []]
        values, scales = _row_sums(groups, index.N, tables, ctx)
        conditions = max((abs(v) / max(s, tiny) for v, s in zip(values[:-1], scales[:-1])), default=mp.mpf(0))
        return OrthogonalityResidual(conditions=conditions, normalization=abs(values[-1] - 1))
    raise DomainError(f"unknown orthogonality type {which!r}", value=which)


def solve_mop(index, ctx, tables=None, cache=None):
    """Both types for one index, with existence flags and conditioning."""
    tables = tables or moment_tables(index, ctx, cache=cache)
    H = build_mixed_moment_matrix(index, ctx, tables)
    pivots, residuals = [], {}
    singular_step = None
    P = A = B = None
    type_I_exists = type_II_exists = False

    try:
        A, B, first = solve_type_I(index, ctx, tables=tables, matrix=H)
        type_I_exists = True
        pivots.extend(first.pivots)
        residuals['typeI'] = orthogonality_residual((A, B), index, 'typeI', ctx, tables).value
    except SingularMatrixError as e:
        logger.warning(f"type I system singular for {index.label}: {str(e)}")
        singular_step = e.step
        pivots.extend(e.pivots)

    try:
        P, second = solve_type_II(index, ctx, tables=tables)
        type_II_exists = True
        pivots.extend(second.pivots)
        residuals['typeII'] = orthogonality_residual(P, index, 'typeII', ctx, tables).value
    except SingularMatrixError as e:
        logger.warning(f"type II system singular for {index.label}: {str(e)}")
        singular_step = e.step if singular_step is None else singular_step
        pivots.extend(e.pivots)

    conditioning = ConditioningReport(
        pivot_min=min(pivots) if pivots else None,
        pivot_max=max(pivots) if pivots else None,
        singular_step=singular_step,
        residuals=residuals,
    )
    return MopSolution(
        index=index, P=P, A=A, B=B, type_I_exists=type_I_exists, type_II_exists=type_II_exists,
        conditioning=conditioning,
    )


def solve_general_K(index, ctx, cache=None):
    if index.K not in (5, 7):
        raise DomainError(f"general-K solve expects K in (5, 7), got {index.K}", value=index.K)
    return solve_mop(index, ctx, cache=cache)


def rescale_zeros(zeros, N, K, ctx):
    """Divide by N^(1/K): fixed weight e^{-z^K} to varying weight e^{-N z^K}."""
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}", value=N)
    if N == 1:
        return list(zeros)
    factor = ctx.mp.root(ctx.mp.mpf(N), K)
    return [z / factor for z in zeros]


def varying_weight_polynomial(poly, N, K, kind, ctx):
    """P(w) -> N^(-N/K) P(N^(1/K) w) (monic again); A, B -> N^(N/K) A(N^(1/K) w)."""
    mp = ctx.mp
    s = mp.root(mp.mpf(N), K)
    substituted = poly.substitute_scale(s)
    if kind == 'typeII':
        return substituted.scaled(s ** -N)
    if kind == 'typeI':
        return substituted.scaled(s ** N)
    raise DomainError(f"unknown polynomial kind {kind!r}", value=kind)


def counting_measure(poly, N, ctx, K=3):
    if poly is None or poly.is_zero:
        raise DomainError("counting measure of the zero polynomial")
    if poly.degree == 0:
        return CountingMeasure(atoms=(), normalizer=N)
    roots = poly_roots(poly, ctx)
    rescaled = rescale_zeros([r.value for r in roots], N, K, ctx)
    return CountingMeasure(atoms=tuple((z, r.multiplicity) for z, r in zip(rescaled, roots)), normalizer=N)


def real_zeros(roots, ctx):
    """Real parts of roots with |Im| < 10^(-digits/8), sorted, multiplicities expanded."""
    cutoff = ctx.tol(8)
    out = []
    for root in roots:
        value, mult = (root, 1) if not hasattr(root, 'multiplicity') else (root.value, root.multiplicity)
        if abs(ctx.mp.mpc(value).imag) < cutoff:
            out.extend([ctx.mp.mpc(value).real] * mult)
    return sorted(out)


def conjugation_defect(roots, ctx):
    """Largest distance from a root's conjugate to its matched partner."""
    mp = ctx.mp
    remaining = [mp.mpc(r) for r in roots]
    worst = mp.mpf(0)
    unmatched = list(range(len(remaining)))
    for z in remaining:
        target = z.conjugate()
        best = min(unmatched, key=lambda j: abs(remaining[j] - target))
        worst = max(worst, abs(remaining[best] - target))
        unmatched.remove(best)
    return worst


def interlace_check(reals_a, reals_p, window=None):
    """Strict alternation of two sorted real zero sets inside ``window``."""
    if window is not None:
        lo, hi = window
        reals_a = [x for x in reals_a if lo <= x <= hi]
        reals_p = [x for x in reals_p if lo <= x <= hi]
    if not reals_a or not reals_p:
        logger.warning("Interlacing check on an empty zero set is vacuous")
        return InterlacingReport(holds=True, count_a=len(reals_a), count_p=len(reals_p), vacuous=True)

    merged = sorted([(x, 'A') for x in reals_a] + [(x, 'P') for x in reals_p], key=lambda item: item[0])
    violations = []
    for (x0, t0), (x1, t1) in zip(merged[:-1], merged[1:]):
        if x0 == x1:
            violations.append({'at': x0, 'reason': 'coincident zeros'})
        elif t0 == t1:
            violations.append({'at': x0, 'next': x1, 'reason': f"consecutive {t0} zeros"})
    if abs(len(reals_a) - len(reals_p)) > 1:
        violations.append({'reason': f"counts {len(reals_a)} and {len(reals_p)} cannot alternate"})
    return InterlacingReport(
        holds=not violations, violations=tuple(violations), count_a=len(reals_a), count_p=len(reals_p)
    )
