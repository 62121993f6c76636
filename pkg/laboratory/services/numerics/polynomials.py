import logging
from dataclasses import dataclass

import numpy as np

from laboratory.exceptions import ConvergenceError, DomainError

logger = logging.getLogger(__name__)

ROOT_SEED = 20240917
ANGLE_OFFSET = 0.4


@dataclass(frozen=True)
class ComplexPoly:
    """Dense polynomial, coefficients in increasing degree order."""
    coeffs: tuple
    ctx: object

    def __post_init__(self):
        mp = self.ctx.mp
        coeffs = [mp.mpc(c) for c in self.coeffs]
        while coeffs and coeffs[-1] == 0:
            coeffs.pop()
        object.__setattr__(self, 'coeffs', tuple(coeffs))

    @classmethod
    def from_roots(cls, roots, ctx):
        poly = cls((1,), ctx)
        for root in roots:
            poly = poly * cls((-root, 1), ctx)
        return poly

    @property
    def degree(self):
        return len(self.coeffs) - 1

    @property
    def is_zero(self):
        return not self.coeffs

    @property
    def leading(self):
        return self.coeffs[-1] if self.coeffs else self.ctx.mp.mpc(0)

    @property
    def monic(self):
        return bool(self.coeffs) and self.coeffs[-1] == 1

    def normalized(self):
        if self.is_zero:
            raise DomainError("cannot normalize the zero polynomial")
        lead = self.leading
        return ComplexPoly(tuple(c / lead for c in self.coeffs), self.ctx)

    def __call__(self, z):
        acc = self.ctx.mp.mpc(0)
        for c in reversed(self.coeffs):
            acc = acc * z + c
        return acc

    def value_and_derivative(self, z):
        p = self.ctx.mp.mpc(0)
        dp = self.ctx.mp.mpc(0)
        for c in reversed(self.coeffs):
            dp = dp * z + p
            p = p * z + c
        return p, dp

    def derivative(self):
        return ComplexPoly(tuple(k * c for k, c in enumerate(self.coeffs) if k), self.ctx)

    def scaled(self, factor):
        return ComplexPoly(tuple(factor * c for c in self.coeffs), self.ctx)

    def substitute_scale(self, factor):
        """Coefficients of z -> p(factor * z)."""
        mp = self.ctx.mp
        factor = mp.mpc(factor)
        return ComplexPoly(tuple(c * factor ** k for k, c in enumerate(self.coeffs)), self.ctx)

    def __add__(self, other):
        size = max(len(self.coeffs), len(other.coeffs))
        zero = self.ctx.mp.mpc(0)
        a = self.coeffs + (zero,) * (size - len(self.coeffs))
        b = other.coeffs + (zero,) * (size - len(other.coeffs))
        return ComplexPoly(tuple(x + y for x, y in zip(a, b)), self.ctx)

    def __neg__(self):
        return self.scaled(-1)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, ComplexPoly):
            return self.scaled(other)
        if self.is_zero or other.is_zero:
            return ComplexPoly((), self.ctx)
        out = [self.ctx.mp.mpc(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return ComplexPoly(tuple(out), self.ctx)

    __rmul__ = __mul__

    def __pow__(self, exponent):
        result = ComplexPoly((1,), self.ctx)
        for _ in range(exponent):
            result = result * self
        return result

    def coefficient_scale(self):
        return max((abs(c) for c in self.coeffs), default=self.ctx.mp.mpf(0))


@dataclass(frozen=True)
class TaggedRoot:
    value: object
    multiplicity: int = 1


def _initial_guesses(monic, ctx):
    mp = ctx.mp
    degree = len(monic) - 1
    radius = max(
        (abs(monic[k]) ** (mp.mpf(1) / (degree - k)) for k in range(degree) if monic[k] != 0),
        default=mp.mpf(1),
    )
    if radius == 0:
        radius = mp.mpf(1)
    rng = np.random.default_rng(ROOT_SEED)
    jitter = rng.uniform(-0.05, 0.05, size=(degree, 2))
    guesses = []
    for j in range(degree):
        angle = 2 * mp.pi * j / degree + ANGLE_OFFSET + float(jitter[j, 0])
        guesses.append(radius * (1 + float(jitter[j, 1])) * mp.expj(angle))
    return guesses


def _cluster(roots, radius):
    clusters = []
    for root in roots:
        for cluster in clusters:
            if any(abs(root - member) <= radius for member in cluster):
                cluster.append(root)
                break
        else:
            clusters.append([root])
    tagged = []
    for cluster in clusters:
        center = sum(cluster) / len(cluster)
        tagged.append(TaggedRoot(value=center, multiplicity=len(cluster)))
    return tagged


def root_residual_bound(poly, root, ctx):
    mp = ctx.mp
    return ctx.tol(2) * poly.coefficient_scale() * max(mp.mpf(1), abs(root)) ** poly.degree


def poly_roots(poly, ctx, max_iterations=None, cluster_radius=None):
    """All roots by Aberth-Ehrlich iteration with Newton polishing.

    Returns ``TaggedRoot`` items sorted by real then imaginary part; roots
    closer than ``cluster_radius`` (default 10^(-digits/4)) are merged and
    counted with multiplicity.
    """
    if poly.degree < 1:
        raise DomainError(f"root finding needs degree >= 1, got {poly.degree}")
    mp = ctx.mp
    degree = poly.degree
    monic_poly = poly.normalized()
    monic = monic_poly.coeffs
    if degree == 1:
        return [TaggedRoot(value=-monic[0])]

    roots = _initial_guesses(monic, ctx)
    stop = mp.mpf(10) ** (-(ctx.digits + ctx.guard_digits // 2))
    # clustered roots converge linearly and never reach ``stop``
    stagnation = ctx.tol(4)
    max_iterations = max_iterations or 200 + 4 * degree
    previous = None
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        largest = mp.mpf(0)
        for j in range(degree):
            zj = roots[j]
            p, dp = monic_poly.value_and_derivative(zj)
            if p == 0:
                continue
            ratio = p / dp if dp != 0 else mp.mpc(1)
            repulsion = mp.fsum(1 / (zj - roots[k]) for k in range(degree) if k != j)
            step = ratio / (1 - ratio * repulsion)
            roots[j] = zj - step
            largest = max(largest, abs(step) / max(mp.mpf(1), abs(roots[j])))
        if largest < stop:
            break
        if previous is not None and largest < stagnation and largest > previous / 4:
            break
        previous = largest
    logger.debug(f"Aberth iteration stopped after {iterations} sweeps for degree {degree}")

    polished = []
    for z in roots:
        for _ in range(2):
            p, dp = monic_poly.value_and_derivative(z)
            if dp == 0 or abs(p) == 0:
                break
            candidate = z - p / dp
            if abs(monic_poly(candidate)) < abs(p):
                z = candidate
        polished.append(z)

    residuals = [abs(poly(z)) for z in polished]
    worst = max(range(degree), key=lambda j: residuals[j] / root_residual_bound(poly, polished[j], ctx))
    if residuals[worst] > root_residual_bound(poly, polished[worst], ctx):
        raise ConvergenceError(
            f"root residual {mp.nstr(residuals[worst], 5)} above bound after {iterations} sweeps",
            best=polished, residual=residuals[worst],
        )

    radius = cluster_radius if cluster_radius is not None else ctx.tol(4)
    tagged = _cluster(polished, radius)
    tagged.sort(key=lambda r: (float(r.value.real), float(r.value.imag)))
    return tagged


def expand_roots(tagged):
    values = []
    for root in tagged:
        values.extend([root.value] * root.multiplicity)
    return values
