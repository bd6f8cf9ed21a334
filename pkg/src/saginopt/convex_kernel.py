"""Shared solver layer: convex quadratic objectives over SOC and affine constraints.

Problems are assembled in factored form (objective ||F x + f0||^2 + q^T x + c)
and handed to the Clarabel interior-point backend. Complex decision vectors
enter through the fixed lifting convention: a complex n-vector maps to the
2n real vector [Re; Im].
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import clarabel

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITERATIONS = "max_iterations"

DEFAULT_TOLERANCE = 1e-7
DEFAULT_MAX_ITERATIONS = 200


class SubproblemInfeasible(RuntimeError):
    """Raised by callers when a subproblem admits no feasible point."""


@dataclass(frozen=True)
class SocConstraint:
    """||A x + b|| <= c^T x + d."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: float

    def residual(self, x):
        return float(np.linalg.norm(self.A @ x + self.b) - (self.c @ x + self.d))


@dataclass(frozen=True)
class AffineEq:
    """a^T x = b."""

    a: np.ndarray
    b: float


@dataclass
class ConvexProblem:
    """Quadratic objective ||F x + f0||^2 + q^T x + c over cones and equalities."""

    dimension: int
    quad_rows: np.ndarray = None       # F, shape (m, n); None means no quadratic part
    quad_offset: np.ndarray = None     # f0, shape (m,)
    linear: np.ndarray = None          # q
    constant: float = 0.0
    soc_constraints: list = field(default_factory=list)
    affine_eq: list = field(default_factory=list)

    def __post_init__(self):
        n = self.dimension
        if self.quad_rows is None:
            self.quad_rows = np.zeros((0, n))
        self.quad_rows = np.atleast_2d(np.asarray(self.quad_rows, dtype=float))
        if self.quad_offset is None:
            self.quad_offset = np.zeros(self.quad_rows.shape[0])
        self.quad_offset = np.asarray(self.quad_offset, dtype=float)
        if self.linear is None:
            self.linear = np.zeros(n)
        self.linear = np.asarray(self.linear, dtype=float)

    @classmethod
    def from_quadratic(cls, P, q, c=0.0, **kwargs):
        """Build from a dense PSD matrix: objective x^T P x + q^T x + c."""
        P = np.asarray(P, dtype=float)
        sym = 0.5 * (P + P.T)
        vals, vecs = np.linalg.eigh(sym)
        floor = -1e-9 * max(1.0, float(np.max(np.abs(vals))))
        if np.min(vals) < floor:
            raise ValueError("quadratic matrix is not PSD (min eig %g)" % np.min(vals))
        vals = np.clip(vals, 0.0, None)
        F = np.sqrt(vals)[:, None] * vecs.T
        return cls(dimension=P.shape[0], quad_rows=F, linear=np.asarray(q, dtype=float),
                   constant=float(c), **kwargs)

    def quadratic_matrix(self):
        """The PSD matrix P of the expanded form x^T P x + q_eff^T x + c_eff."""
        return self.quad_rows.T @ self.quad_rows

    def objective_value(self, x):
        r = self.quad_rows @ x + self.quad_offset
        return float(r @ r + self.linear @ x + self.constant)


@dataclass(frozen=True)
class ConvexSolution:
    x: np.ndarray
    objective_value: float
    status: str
    trace: tuple = ()


def quadratic_leq_affine(A, b, const, c, d):
    """SOC encoding of sum_i (A_i x + b_i)^2 + const <= c^T x + d.

    Rotated-cone identity: u >= ||y||^2 + const with u = c^T x + d becomes
    ||[2y; 2*sqrt(const); u - 1]|| <= u + 1.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    c = np.asarray(c, dtype=float)
    if const < 0:
        raise ValueError("constant term must be nonnegative")
    n = A.shape[1]
    extra = [] if const == 0.0 else [np.zeros(n)]
    extra_b = [] if const == 0.0 else [2.0 * np.sqrt(const)]
    A_soc = np.vstack([2.0 * A] + extra + [c[None, :]])
    b_soc = np.concatenate([2.0 * b, np.asarray(extra_b), [d - 1.0]])
    return SocConstraint(A=A_soc, b=b_soc, c=c, d=d + 1.0)


def norm_ball(selector, radius, dimension):
    """||x[selector]|| <= radius as an SOC constraint."""
    idx = np.asarray(selector, dtype=int)
    A = np.zeros((idx.size, dimension))
    A[np.arange(idx.size), idx] = 1.0
    return SocConstraint(A=A, b=np.zeros(idx.size),
                         c=np.zeros(dimension), d=float(radius))


# --- complex-to-real lifting (fixed convention: [Re; Im]) -------------------

def lift(z):
    z = np.asarray(z)
    return np.concatenate([np.real(z), np.imag(z)])


def unlift(x):
    n = x.size // 2
    return x[:n] + 1j * x[n:]


def conj_inner_rows(h):
    """Real 2x2n matrix R with R @ lift(w) = [Re(h^H w); Im(h^H w)]."""
    hr, hi = np.real(h), np.imag(h)
    return np.block([[hr, hi], [-hi, hr]])


def transpose_inner_rows(c):
    """Real 2x2n matrix R with R @ lift(z) = [Re(z^T c); Im(z^T c)]."""
    cr, ci = np.real(c), np.imag(c)
    return np.block([[cr, -ci], [ci, cr]])


def real_part_functional(a):
    """Vector r with r @ lift(w) = Re(a^H w)."""
    return np.concatenate([np.real(a), np.imag(a)])


def transpose_real_functional(d):
    """Vector r with r @ lift(z) = Re(z^T d)."""
    return np.concatenate([np.real(d), -np.imag(d)])


# --- backend ----------------------------------------------------------------

_STATUS_MAP = {
    "Solved": OPTIMAL,
    "AlmostSolved": OPTIMAL,
    "PrimalInfeasible": INFEASIBLE,
    "AlmostPrimalInfeasible": INFEASIBLE,
    "DualInfeasible": INFEASIBLE,
    "AlmostDualInfeasible": INFEASIBLE,
}


def _solve_once(problem, tolerance, max_iterations):
    n = problem.dimension
    F = problem.quad_rows
    P = sp.triu(sp.csc_matrix(2.0 * (F.T @ F)), format="csc")
    q = problem.linear + 2.0 * (F.T @ problem.quad_offset)

    blocks = []
    rhs = []
    cones = []
    n_eq = len(problem.affine_eq)
    if n_eq:
        blocks.append(np.vstack([eq.a for eq in problem.affine_eq]))
        rhs.append(np.array([eq.b for eq in problem.affine_eq]))
        cones.append(clarabel.ZeroConeT(n_eq))
    for con in problem.soc_constraints:
        blocks.append(np.vstack([-con.c[None, :], -con.A]))
        rhs.append(np.concatenate([[con.d], con.b]))
        cones.append(clarabel.SecondOrderConeT(con.A.shape[0] + 1))
    if blocks:
        A = sp.csc_matrix(np.vstack(blocks))
        b = np.concatenate(rhs)
    else:
        A = sp.csc_matrix((0, n))
        b = np.zeros(0)

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = max_iterations
    settings.tol_gap_abs = tolerance
    settings.tol_gap_rel = tolerance
    settings.tol_feas = tolerance
    solver = clarabel.DefaultSolver(P, q, A, b, cones, settings)
    sol = solver.solve()
    status = _STATUS_MAP.get(str(sol.status), MAX_ITERATIONS)
    x = np.asarray(sol.x, dtype=float)
    return x, status


def solve(problem, tolerance=DEFAULT_TOLERANCE, max_iterations=DEFAULT_MAX_ITERATIONS,
          record_trace=False):
    """Minimize the problem objective; deterministic for identical inputs.

    The optional trace probes the backend at increasing iteration caps and
    records the running best feasible objective, so it is non-increasing by
    construction.
    """
    x, status = _solve_once(problem, tolerance, max_iterations)
    value = problem.objective_value(x) if x.size else float("nan")
    trace = ()
    if record_trace and status == OPTIMAL:
        probes = []
        best = np.inf
        for cap in range(1, max_iterations + 1):
            xi, si = _solve_once(problem, tolerance, cap)
            feasible = all(c.residual(xi) <= 10 * tolerance for c in problem.soc_constraints) \
                and all(abs(e.a @ xi - e.b) <= 10 * tolerance for e in problem.affine_eq)
            if feasible:
                best = min(best, problem.objective_value(xi))
                probes.append(best)
            if si == OPTIMAL:
                break
        trace = tuple(probes)
    return ConvexSolution(x=x, objective_value=value, status=status, trace=trace)


def dump_problem(problem, path):
    """Plain-text dump: dimension, objective rows, then one line per constraint."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("dimension %d\n" % problem.dimension)
        fh.write("constant %.17g\n" % problem.constant)
        fh.write("linear %s\n" % " ".join("%.17g" % t for t in problem.linear))
        for i, row in enumerate(problem.quad_rows):
            fh.write("quad_row %d offset %.17g coeffs %s\n"
                     % (i, problem.quad_offset[i], " ".join("%.17g" % t for t in row)))
        for i, con in enumerate(problem.soc_constraints):
            fh.write("soc %d d %.17g c %s\n" % (i, con.d,
                     " ".join("%.17g" % t for t in con.c)))
            for j, row in enumerate(con.A):
                fh.write("soc %d row %d b %.17g coeffs %s\n"
                         % (i, j, con.b[j], " ".join("%.17g" % t for t in row)))
        for i, eq in enumerate(problem.affine_eq):
            fh.write("eq %d b %.17g a %s\n" % (i, eq.b,
                     " ".join("%.17g" % t for t in eq.a)))
