"""Radial Dirichlet eigenproblem of the linearized operator.

For a profile U_m the eigenpairs (gamma_j, V_j) solve

    -V'' - (N-1)/r V' - q(r) V = gamma V,   V'(0) = 0, V(1) = 0,

with ``q = mu_m^2 (p-1) |U_m|^{p-2}``.  Two independent discretizations
are provided:

``collocation``
    Chebyshev-Lobatto collocation on subintervals split at the interior
    zeros of U_m.  q has a cusp there when p < 4, so a single global
    polynomial would only converge algebraically; on each piece q is smooth
    (or has an endpoint singularity) and convergence is spectral.
``finite_difference``
    Second-order conservative central differences on a uniform grid.  The
    origin row is the symmetric limit ``-2N (V_1 - V_0)/h^2``.  The matrix
    is symmetric in the weighted inner product and is solved as a
    tridiagonal problem.
"""

from dataclasses import dataclass, field
import math

import numpy as np
import scipy.linalg
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

from .chebyshev import PiecewiseChebyshev
from .errors import (
    GridTooCoarse,
    PositiveGroundEigenvalue,
    SolverFailure,
    ZeroDenominator,
)
from .radial_ode import nonlinearity

BACKENDS = ("collocation", "finite_difference")
MIN_NODES = 16
DENOM_TOL = 1e-12
NORMALIZATION = "sup"


def sphere_area(N):
    """|S^{N-1}| = 2 pi^{N/2} / Gamma(N/2); cancels in every reported ratio."""
    return 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)


def potential_values(profile, r):
    U = profile.evaluate(r, order=0)[0]
    return profile.mu_m**2 * nonlinearity(U, profile.p)[1]


@dataclass
class LinearizedPotential:
    """q(r) = mu_m^2 (p-1)|U_m(r)|^{p-2} sampled on a backend grid.

    ``grid`` is a :class:`PiecewiseChebyshev` for collocation and the array
    of uniform nodes ``i/n`` (i = 0..n) for finite differences.
    """

    profile: object
    backend: str
    grid: object
    nodes: np.ndarray
    values: np.ndarray

    @property
    def mu_m(self):
        return self.profile.mu_m

    @property
    def p(self):
        return self.profile.p

    @property
    def N(self):
        return self.profile.N

    @classmethod
    def for_backend(cls, profile, backend="collocation", n=None):
        if backend not in BACKENDS:
            raise ValueError(f"unknown backend {backend!r}")
        if backend == "collocation":
            n = 257 if n is None else n
            if n < MIN_NODES:
                raise GridTooCoarse(f"{n} nodes < {MIN_NODES}")
            bp = [0.0] + list(profile.interior_zeros) + [1.0]
            grid = PiecewiseChebyshev.split(n, bp)
            nodes = grid.nodes
        else:
            n = 2048 if n is None else n
            if n + 1 < MIN_NODES:
                raise GridTooCoarse(f"{n + 1} nodes < {MIN_NODES}")
            nodes = np.arange(n + 1) / n
            grid = nodes
        return cls(profile, backend, grid, nodes, potential_values(profile, nodes))


@dataclass
class DiscreteEigenproblem:
    """Matrix form of the radial eigenproblem for one backend."""

    potential: LinearizedPotential
    backend: str
    nodes: np.ndarray
    N: int
    matrices: dict = field(repr=False)

    def radial_jets(self, V):
        """(V_r, V_rr) consistent with this discretization's Laplacian.

        ``V_rr + (N-1)/r V_r`` (``N V_rr`` at r = 0) reproduces the discrete
        radial Laplacian exactly at every equation node.
        """
        V = np.asarray(V, dtype=float)
        if self.backend == "collocation":
            D = self.matrices["D"]
            Vr = D @ V
            return Vr, D @ Vr
        h, N = self.matrices["h"], self.N
        r = self.nodes
        Vr = np.empty_like(V)
        Vr[0] = 0.0
        Vr[1:-1] = (V[2:] - V[:-2]) / (2 * h)
        Vr[-1] = (3 * V[-1] - 4 * V[-2] + V[-3]) / (2 * h)
        lap = _flux_laplacian(V, h, N)
        Vrr = np.empty_like(V)
        Vrr[0] = lap[0] / N
        Vrr[1:-1] = lap[1:] - (N - 1) / r[1:-1] * Vr[1:-1]
        Vrr[-1] = (2 * V[-1] - 5 * V[-2] + 4 * V[-3] - V[-4]) / h**2
        return Vr, Vrr

    def equation_mask(self):
        """Nodes where the differential equation (not a constraint) is imposed."""
        mask = np.ones(len(self.nodes), dtype=bool)
        mask[self.matrices["constrained"]] = False
        return mask

    def apply_operator(self, V):
        """-Delta V - q V at every node (meaningful on :meth:`equation_mask`)."""
        Vr, Vrr = self.radial_jets(V)
        return -radial_laplacian(self.nodes, Vr, Vrr, self.N) - self.potential.values * V


def radial_laplacian(r, Vr, Vrr, N):
    """V_rr + (N-1)/r V_r with the r = 0 limit N V_rr."""
    r = np.asarray(r, dtype=float)
    out = np.array(Vrr, dtype=float, copy=True)
    pos = r > 0
    out[..., pos] += (N - 1) / r[pos] * Vr[..., pos]
    out[..., ~pos] *= N
    return out


def _flux_laplacian(V, h, N):
    """Conservative Laplacian at nodes 0..n-1 of the uniform grid (V has n+1 entries)."""
    n = len(V) - 1
    r = np.arange(n + 1) * h
    rph = (r[:-1] + 0.5 * h) ** (N - 1)
    flux = rph * (V[1:] - V[:-1])
    lap = np.empty(n)
    lap[0] = 2 * N * (V[1] - V[0]) / h**2
    lap[1:] = (flux[1:] - flux[:-1]) / (h**2 * r[1:n] ** (N - 1))
    return lap


def assemble_eigenproblem(potential, backend=None):
    """Build the discrete eigenproblem on the potential's grid."""
    backend = potential.backend if backend is None else backend
    if backend != potential.backend:
        raise ValueError("potential grid was built for a different backend")
    N = potential.N
    r = potential.nodes
    if len(r) < MIN_NODES:
        raise GridTooCoarse(f"{len(r)} nodes < {MIN_NODES}")
    q = potential.values
    if backend == "collocation":
        grid = potential.grid
        D = grid.diff_matrix()
        D2 = D @ D
        rinv = np.where(r > 0, 1.0 / np.where(r > 0, r, 1.0), 0.0)
        A = -(D2 + (N - 1) * rinv[:, None] * D) - np.diag(q)
        constrained = [0]
        A[0] = D[0]
        for left, right in zip(grid.blocks[:-1], grid.blocks[1:]):
            i, j = left.stop - 1, right.start
            A[i] = 0.0
            A[i, i], A[i, j] = 1.0, -1.0
            A[j] = 0.0
            A[j, left] = D[i, left]
            A[j, right] -= D[j, right]
            constrained += [i, j]
        constrained.append(len(r) - 1)
        A[-1] = 0.0
        A[-1, -1] = 1.0
        mats = {"A": A, "D": D, "constrained": np.array(constrained)}
    else:
        n = len(r) - 1
        h = 1.0 / n
        rph = (r[:-1] + 0.5 * h) ** (N - 1)
        W = np.empty(n)
        W[0] = rph[0] / (2 * N)
        W[1:] = r[1:n] ** (N - 1)
        diag = np.empty(n)
        diag[0] = 2 * N / h**2
        diag[1:] = (rph[1:n] + rph[: n - 1]) / (h**2 * W[1:])
        upper = -rph[: n - 1] / (h**2 * W[: n - 1])
        upper[0] = -2 * N / h**2
        lower = -rph[: n - 1] / (h**2 * W[1:])
        diag -= q[:n]
        mats = {"diag": diag, "off": -np.sqrt(upper * lower), "W": W, "h": h,
                "constrained": np.array([n])}
    return DiscreteEigenproblem(potential, backend, r, N, mats)


@dataclass
class EigenPair:
    """One Dirichlet eigenpair; V is sup-normalized and positive near r = 0."""

    j: int
    gamma: float
    nodes: np.ndarray
    V_values: np.ndarray
    dV_at_1: float
    normalization: str = NORMALIZATION
    backend: str = "collocation"
    problem: object = field(default=None, repr=False, compare=False)

    def evaluate(self, r):
        r = np.asarray(r, dtype=float)
        if self.backend == "collocation" and self.problem is not None:
            return self.problem.potential.grid.interpolate(self.V_values, r).reshape(r.shape)
        # interface nodes of a multi-domain grid appear twice
        nodes, idx = np.unique(self.nodes, return_index=True)
        return CubicSpline(nodes, self.V_values[idx])(r)

    def jets(self):
        """(V, V_r, V_rr) on ``nodes`` from the backend's own differentiation."""
        Vr, Vrr = self.problem.radial_jets(self.V_values)
        return self.V_values, Vr, Vrr

    def sign_changes(self, interior_tol=1e-10):
        v = self.V_values[:-1]
        v = v[np.abs(v) > interior_tol]
        return int(np.count_nonzero(np.diff(np.sign(v)) != 0))

    def to_dict(self):
        return {"j": self.j, "gamma": self.gamma, "r": self.nodes.tolist(),
                "V": self.V_values.tolist(), "dV_at_1": self.dV_at_1,
                "normalization": self.normalization, "backend": self.backend}

    @classmethod
    def from_dict(cls, d):
        return cls(d["j"], d["gamma"], np.asarray(d["r"], dtype=float),
                   np.asarray(d["V"], dtype=float), d["dV_at_1"], d["normalization"],
                   d["backend"])

    def __eq__(self, other):
        return isinstance(other, EigenPair) and self.to_dict() == other.to_dict()

    __hash__ = None


def _sup_of(problem, V):
    """Location and value of max |V|, refined on the interpolant for collocation."""
    k = int(np.argmax(np.abs(V)))
    if problem.backend != "collocation" or k in (0, len(V) - 1):
        return V[k]
    grid = problem.potential.grid
    r = problem.nodes
    lo, hi = r[max(k - 1, 0)], r[min(k + 1, len(r) - 1)]
    if lo == hi:
        return V[k]
    sgn = np.sign(V[k])
    res = minimize_scalar(lambda t: -sgn * grid.interpolate(V, t)[0], bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-13})
    return sgn * max(abs(V[k]), -res.fun)


def solve_spectrum(problem, j_max=3):
    """The ``j_max`` smallest eigenpairs, sorted and sup-normalized."""
    if problem.backend == "collocation":
        A = problem.matrices["A"]
        c = problem.matrices["constrained"]
        f = np.setdiff1d(np.arange(len(problem.nodes)), c)
        elim = -np.linalg.solve(A[np.ix_(c, c)], A[np.ix_(c, f)])
        red = A[np.ix_(f, f)] + A[np.ix_(f, c)] @ elim
        try:
            w, vecs = scipy.linalg.eig(red)
        except scipy.linalg.LinAlgError as exc:
            raise SolverFailure(str(exc)) from exc
        order = np.argsort(w.real)[:j_max]
        w, vecs = w[order], vecs[:, order]
        if np.any(np.abs(w.imag) > 1e-8 * np.maximum(1.0, np.abs(w.real))):
            raise SolverFailure("collocation spectrum has non-real leading eigenvalues")
        full = np.empty((len(problem.nodes), len(order)))
        full[f] = vecs.real
        full[c] = elim @ vecs.real
        gammas = w.real
    else:
        m = problem.matrices
        try:
            gammas, y = scipy.linalg.eigh_tridiagonal(
                m["diag"], m["off"], select="i", select_range=(0, j_max - 1))
        except scipy.linalg.LinAlgError as exc:
            raise SolverFailure(str(exc)) from exc
        full = np.zeros((len(problem.nodes), len(gammas)))
        full[:-1] = y / np.sqrt(m["W"])[:, None]
    if len(gammas) < j_max:
        raise SolverFailure(f"only {len(gammas)} eigenvalues available")

    pairs = []
    for j, (g, V) in enumerate(zip(gammas, full.T), start=1):
        if j == 1:
            sign = np.sign(V[np.argmax(np.abs(V))])
        else:
            sign = np.sign(V[0]) if V[0] != 0 else 1.0
        V = V * sign
        V = V / abs(_sup_of(problem, V))
        V[-1] = 0.0
        Vr, _ = problem.radial_jets(V)
        pairs.append(EigenPair(j, float(g), problem.nodes.copy(), V, float(Vr[-1]),
                               NORMALIZATION, problem.backend, problem))
    return pairs


def _quadrature(potential):
    if potential.backend == "collocation":
        w = potential.grid.quadrature_weights()
        return lambda f: float(w @ f)
    x = potential.nodes
    return lambda f: float(simpson(f, x=x))


def rayleigh_quotient(V, potential, dV=None):
    """(int r^{N-1}[V'^2 - q V^2]) / (int r^{N-1} V^2) on the potential's grid.

    ``V`` must vanish at r = 1.  ``dV`` defaults to spectral differentiation
    (collocation) or second-order central differences (uniform grid).
    """
    V = np.asarray(V, dtype=float)
    r = potential.nodes
    N = potential.N
    if dV is None:
        if potential.backend == "collocation":
            dV = potential.grid.diff_matrix() @ V
        else:
            dV = np.gradient(V, r, edge_order=2)
    quad = _quadrature(potential)
    w = r ** (N - 1)
    den = quad(w * V**2)
    if abs(den) < 1e-300:
        raise ZeroDenominator("int r^{N-1} V^2 vanishes")
    return quad(w * (dV**2 - potential.values * V**2)) / den


@dataclass
class IdentityReport:
    """Both sides of the U_m' energy identity, each by two quadrature rules.

    ``lhs`` is the Clenshaw-Curtis value and ``rhs`` the composite Simpson
    value, so ``relative_discrepancy`` compares independent rules.
    """

    lhs: float
    rhs: float
    lhs_simpson: float
    rhs_clenshaw_curtis: float
    relative_discrepancy: float
    omega_N: float
    n: int

    def to_dict(self):
        return dict(self.__dict__)


def _identity_integrands(profile, r):
    N, p, mu = profile.N, profile.p, profile.mu_m
    U, dU, d2U = profile.evaluate(r, order=2)
    q = mu**2 * nonlinearity(U, p)[1]
    lhs = r ** (N - 1) * (d2U**2 - q * dU**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        rhs = np.where(r > 0, r ** (N - 3.0) * dU**2, 0.0)
    if N == 2:
        # dU = U''(0) r + O(r^3), so dU^2 / r -> 0 at the origin
        rhs[r == 0] = 0.0
    return lhs, -(N - 1) * rhs


def negativity_identity_check(profile, n=2049):
    """int r^{N-1}[U''^2 - q U'^2] = -(N-1) int r^{N-3} U'^2 (omega_N dropped)."""
    bp = [0.0] + list(profile.interior_zeros) + [1.0]
    cc = PiecewiseChebyshev.split(n, bp)
    l_cc, r_cc = _identity_integrands(profile, cc.nodes)
    w = cc.quadrature_weights()
    if n % 2 == 0:
        n += 1
    x = np.linspace(0.0, 1.0, n)
    l_s, r_s = _identity_integrands(profile, x)
    lhs, rhs = float(w @ l_cc), float(simpson(r_s, x=x))
    return IdentityReport(
        lhs=lhs, rhs=rhs, lhs_simpson=float(simpson(l_s, x=x)),
        rhs_clenshaw_curtis=float(w @ r_cc),
        relative_discrepancy=abs(lhs - rhs) / abs(rhs),
        omega_N=sphere_area(profile.N), n=n)


def kernel_simplicity_check(gammas, lambda_m, l_max=10, rtol=1e-8):
    """True iff lambda_m l^2 = -gamma_j has the single solution (l, j) = (1, 1)."""
    gammas = np.asarray(gammas, dtype=float)
    tol = rtol * abs(gammas[0])
    hits = [(ell, j)
            for j, g in enumerate(gammas, start=1) if g < 0
            for ell in range(l_max + 1)
            if abs(lambda_m * ell**2 + g) <= tol]
    return hits == [(1, 1)]


@dataclass
class BifurcationDatum:
    """(m, mu_m, lambda_m, c_m, delta_m, beta_m) with the objects they came from."""

    N: int
    p: float
    m: int
    mu_m: float
    lambda_m: float
    c_m: float
    delta_m: float
    beta_m: float
    gamma_spectrum: list
    normalization: str = NORMALIZATION
    backend: str = "collocation"
    V_m: EigenPair = field(default=None, repr=False)
    profile: object = field(default=None, repr=False)

    CSV_FIELDS = ("N", "p", "m", "mu_m", "lambda_m", "c_m", "delta_m", "beta_m")

    def to_dict(self):
        return {"N": self.N, "p": self.p, "m": self.m, "mu_m": self.mu_m,
                "lambda_m": self.lambda_m, "c_m": self.c_m, "delta_m": self.delta_m,
                "beta_m": self.beta_m, "gamma_spectrum": list(self.gamma_spectrum),
                "normalization": self.normalization, "backend": self.backend}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def csv_row(self):
        return [getattr(self, k) for k in self.CSV_FIELDS]

    def __eq__(self, other):
        return isinstance(other, BifurcationDatum) and self.to_dict() == other.to_dict()

    __hash__ = None


def bifurcation_constants(pair, profile, spectrum=None):
    if pair.j != 1:
        raise ValueError("bifurcation constants come from the j = 1 eigenpair")
    if pair.gamma >= 0:
        raise PositiveGroundEigenvalue(
            f"gamma_1 = {pair.gamma:.6g} >= 0; refine the discretization")
    d2U = profile.d2U_at_1
    if abs(d2U) < DENOM_TOL:
        raise ZeroDenominator(f"|U''_m(1)| = {abs(d2U):.3g} < {DENOM_TOL}")
    lam = -pair.gamma
    delta = pair.dV_at_1 / d2U
    gammas = [pair.gamma] if spectrum is None else [e.gamma for e in spectrum]
    return BifurcationDatum(
        N=profile.N, p=profile.p, m=profile.m, mu_m=profile.mu_m, lambda_m=lam,
        c_m=profile.c_m, delta_m=delta, beta_m=delta / math.sqrt(lam),
        gamma_spectrum=gammas, normalization=pair.normalization, backend=pair.backend,
        V_m=pair, profile=profile)


def compute_datum(profile, backend="collocation", n=None, j_max=3):
    """Potential -> eigenproblem -> spectrum -> constants in one call."""
    pot = LinearizedPotential.for_backend(profile, backend, n)
    spectrum = solve_spectrum(assemble_eigenproblem(pot), j_max)
    return bifurcation_constants(spectrum[0], profile, spectrum)


def fd_richardson(profile, n=4096, j_max=1):
    """FD constants at n and 2n intervals with second-order Richardson limits."""
    coarse = compute_datum(profile, "finite_difference", n, j_max)
    fine = compute_datum(profile, "finite_difference", 2 * n, j_max)

    def extrap(a, b):
        return (4.0 * b - a) / 3.0

    return {
        "n": n,
        "coarse": coarse,
        "fine": fine,
        "gamma_1": extrap(coarse.gamma_spectrum[0], fine.gamma_spectrum[0]),
        "delta_m": extrap(coarse.delta_m, fine.delta_m),
        "lambda_m": extrap(coarse.lambda_m, fine.lambda_m),
    }
