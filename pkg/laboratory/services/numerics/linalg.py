import logging
from dataclasses import dataclass

from django.conf import settings

from laboratory.exceptions import ConvergenceError, DomainError, SingularMatrixError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ComplexMatrix:
    rows: int
    cols: int
    entries: tuple
    ctx: object

    def __post_init__(self):
        if self.rows * self.cols != len(self.entries):
            raise DomainError(f"{self.rows}x{self.cols} matrix needs {self.rows * self.cols} entries, got {len(self.entries)}")

    @classmethod
    def from_rows(cls, rows, ctx):
        rows = [list(r) for r in rows]
        width = len(rows[0]) if rows else 0
        if any(len(r) != width for r in rows):
            raise DomainError("ragged rows")
        mp = ctx.mp
        return cls(len(rows), width, tuple(mp.mpc(x) for r in rows for x in r), ctx)

    @classmethod
    def identity(cls, size, ctx):
        return cls.from_rows([[1 if i == j else 0 for j in range(size)] for i in range(size)], ctx)

    def __getitem__(self, position):
        i, j = position
        return self.entries[i * self.cols + j]

    def row(self, i):
        return list(self.entries[i * self.cols:(i + 1) * self.cols])

    def to_rows(self):
        return [self.row(i) for i in range(self.rows)]

    def transpose(self):
        return ComplexMatrix.from_rows([[self[i, j] for i in range(self.rows)] for j in range(self.cols)], self.ctx)

    def permute_rows(self, order):
        return ComplexMatrix.from_rows([self.row(i) for i in order], self.ctx)

    def matvec(self, x):
        mp = self.ctx.mp
        return [mp.fsum(self[i, j] * x[j] for j in range(self.cols)) for i in range(self.rows)]

    def norm_inf(self):
        mp = self.ctx.mp
        return max((mp.fsum(abs(v) for v in self.row(i)) for i in range(self.rows)), default=mp.mpf(0))


@dataclass(frozen=True)
class LinearSolution:
    x: tuple
    pivots: tuple
    residual: object = None

    @property
    def pivot_ratio(self):
        return min(self.pivots) / max(self.pivots) if self.pivots else None


def residual_norm(A, x, b):
    mp = A.ctx.mp
    return max((abs(r - bi) for r, bi in zip(A.matvec(x), b)), default=mp.mpf(0))


def solve_linear(A, b, ctx, verify=None):
    """Full-pivot Gaussian elimination.

    Raises ``SingularMatrixError`` when a pivot falls below
    10^(-digits + 2 guard) * ||A||_inf. With ``verify`` (default: the
    ``CHECK_RESIDUALS`` setting) the solution is re-multiplied and checked
    against 10^(-digits/2) ||A|| ||x||.
    """
    if A.rows != A.cols:
        raise DomainError(f"square matrix required, got {A.rows}x{A.cols}")
    if len(b) != A.rows:
        raise DomainError(f"right-hand side has {len(b)} entries for {A.rows} rows")
    mp = ctx.mp
    n = A.rows
    work = [[mp.mpc(v) for v in A.row(i)] + [mp.mpc(b[i])] for i in range(n)]
    norm = A.norm_inf()
    threshold = mp.mpf(10) ** (-(ctx.digits - 2 * ctx.guard_digits)) * norm
    columns = list(range(n))
    pivots = []

    for k in range(n):
        best, pi, pj = mp.mpf(-1), k, k
        for i in range(k, n):
            row = work[i]
            for j in range(k, n):
                size = abs(row[j])
                if size > best:
                    best, pi, pj = size, i, j
        if best < threshold or best == 0:
            pivots.append(best)
            raise SingularMatrixError(
                f"pivot {mp.nstr(best, 5)} below threshold at step {k}", pivots=pivots, step=k
            )
        pivots.append(best)
        if pi != k:
            work[k], work[pi] = work[pi], work[k]
        if pj != k:
            for row in work:
                row[k], row[pj] = row[pj], row[k]
            columns[k], columns[pj] = columns[pj], columns[k]
        pivot_row = work[k]
        pivot = pivot_row[k]
        for i in range(k + 1, n):
            row = work[i]
            factor = row[k] / pivot
            if factor == 0:
                continue
            for j in range(k, n + 1):
                row[j] -= factor * pivot_row[j]

    y = [mp.mpc(0)] * n
    for k in range(n - 1, -1, -1):
        row = work[k]
        acc = row[n] - mp.fsum(row[j] * y[j] for j in range(k + 1, n))
        y[k] = acc / row[k]
    x = [mp.mpc(0)] * n
    for k in range(n):
        x[columns[k]] = y[k]

    if verify is None:
        verify = settings.MOPS_LAB.get('CHECK_RESIDUALS', False)
    residual = None
    if verify:
        residual = residual_norm(A, x, b)
        scale = norm * max((abs(v) for v in x), default=mp.mpf(0))
        if residual > ctx.tol(2) * scale:
            raise ConvergenceError(
                f"re-multiplication residual {mp.nstr(residual, 5)} above bound", best=x, residual=residual
            )
    logger.debug(f"solved {n}x{n} system, pivot ratio {mp.nstr(pivots[-1] / pivots[0], 5) if pivots else 'n/a'}")
    return LinearSolution(x=tuple(x), pivots=tuple(pivots), residual=residual)
