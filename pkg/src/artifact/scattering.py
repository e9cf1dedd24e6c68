"""On-shell scattering on metric graphs: S-matrices, interior amplitudes,
embedded eigenvalues, and the identities they satisfy.

For a graph with ``n`` external and ``m`` internal lines and global boundary
condition ``(A, B)``, the scattering solution at energy ``E = k^2 > 0`` is the
plane-wave ansatz ``e^{-ikx} + S e^{ikx}`` on external lines and
``alpha e^{ikx} + beta e^{-ikx}`` on internal ones.  Imposing the boundary
condition turns this into the linear system

    ``Z(E) (S; alpha; beta) = -(A - ikB) (I; 0; 0)``,
    ``Z(E) = A X(E) + ik B Y(E)``,

whose coefficient blocks are assembled by :func:`build_xyz`.  ``Z`` is
invertible away from a discrete set of energies; those exceptional energies
are exactly the eigenvalues embedded in the continuous spectrum, located by
:func:`spectrum`.  At an embedded eigenvalue the system stays solvable, the S
block is still unique, and :func:`solve_scattering` returns the minimum-norm
solution with ``at_eigenvalue`` set.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import boundary, numkernel
from .boundary import BoundaryCondition
from .graph import GlobalBC

# Relative sigma_min/sigma_max threshold below which Z(E) counts as singular.
SINGULAR_TOL = 1e-8
# Fixed iteration budget of the golden-section refinement.
GOLDEN_ITERATIONS = 40
# Candidate eigenvalues closer than this (relatively) are merged.
MERGE_RELATIVE = 1e-6
# Default grid density: points per unit of max_length * (k_max - k_min).
GRID_DENSITY = 2000
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


class NonpositiveEnergy(ValueError):
    """Raised when an operation needs an energy strictly above 0."""


class NoExternalLines(ValueError):
    """Raised when scattering is requested on a graph with no open channels."""


class BadWindow(ValueError):
    """Raised when a spectral search window is empty or nonpositive."""


class NotAnEigenvalue(ValueError):
    """Raised when an eigenfunction is requested at a regular energy."""


class OutOfDomain(ValueError):
    """Raised when a wavefunction is evaluated outside its line's domain."""


class InconsistentSystem(RuntimeError):
    """Raised when the minimum-norm solve leaves a large residual.

    For admissible boundary conditions the scattering system is solvable at
    every positive energy, so this signals corrupted input rather than a
    legitimate outcome.
    """


@dataclass(frozen=True)
class ScatteringResult:
    """Scattering data at one energy.

    ``s`` is n x n; ``alpha``/``beta`` are m x n (column = incoming channel).
    ``at_eigenvalue`` marks energies where Z(E) was numerically singular; the
    S block is unique there but alpha/beta are the minimum-norm choice.
    """

    energy: float
    s: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    at_eigenvalue: bool
    unitarity_defect: float


@dataclass(frozen=True)
class SpectrumResult:
    """Embedded eigenvalues found in a window, sorted ascending.

    ``residuals[i]`` is sigma_min(Z) at ``eigenvalues[i]``.
    """

    eigenvalues: tuple
    residuals: tuple
    search_window: tuple
    grid_points: int


def _check_energy(energy: float) -> float:
    energy = float(energy)
    if not np.isfinite(energy) or energy <= 0.0:
        raise NonpositiveEnergy(f"energy must be finite and > 0, got {energy!r}")
    return energy


def build_xyz(gbc: GlobalBC, energy: float):
    """The matrices ``X(E)``, ``Y(E)``, ``Z(E)`` of the scattering system.

    Endpoint order is (externals, internal near ends, internal far ends);
    with no internal lines both X and Y degenerate to the identity.
    """
    energy = _check_energy(energy)
    n, m = gbc.n, gbc.m
    k = np.sqrt(energy)
    size = n + 2 * m
    x = np.eye(size, dtype=complex)
    y = np.eye(size, dtype=complex)
    if m:
        phases = np.exp(1j * k * np.asarray(gbc.lengths))
        sl0 = slice(n, n + m)
        sla = slice(n + m, n + 2 * m)
        x[sl0, sla] = np.eye(m)
        x[sla, sl0] = np.diag(phases)
        x[sla, sla] = np.diag(1.0 / phases)
        y[sl0, sla] = -np.eye(m)
        y[sla, sl0] = -np.diag(phases)
        y[sla, sla] = np.diag(1.0 / phases)
    z = gbc.bc.A @ x + 1j * k * gbc.bc.B @ y
    return x, y, z


def smatrix_single_vertex(bc: BoundaryCondition, energy: float,
                          tol: float = boundary.DEFAULT_TOL) -> np.ndarray:
    """On-shell S-matrix of a single vertex with only external lines.

    Evaluates ``S(E) = -(A + ikB)^{-1} (A - ikB)``, which is unitary for every
    admissible condition and every ``E > 0``.
    """
    energy = _check_energy(energy)
    boundary.require_valid(bc, tol)
    k = np.sqrt(energy)
    return -numkernel.solve_linear(bc.A + 1j * k * bc.B, bc.A - 1j * k * bc.B)


def solve_scattering(gbc: GlobalBC, energy: float,
                     tol: float = SINGULAR_TOL) -> ScatteringResult:
    """Solve for the S-matrix and interior amplitudes at one energy.

    Args:
        gbc: assembled global boundary condition (must be admissible).
        energy: energy, strictly positive.
        tol: relative singularity threshold on Z(E); below it the system is
            solved through the pseudoinverse (minimum-norm least squares) and
            ``at_eigenvalue`` is set.

    Raises:
        NonpositiveEnergy, NoExternalLines, InvalidBoundaryCondition.
    """
    energy = _check_energy(energy)
    if gbc.n == 0:
        raise NoExternalLines("graph has no external lines to scatter on")
    boundary.require_valid(gbc.bc)
    n, m = gbc.n, gbc.m
    k = np.sqrt(energy)
    _, _, z = build_xyz(gbc, energy)
    rhs = -(gbc.bc.A - 1j * k * gbc.bc.B)[:, :n]
    sigma = np.linalg.svd(z, compute_uv=False)
    singular = sigma[0] == 0.0 or sigma[-1] < tol * sigma[0]
    if singular:
        sol = numkernel.pseudoinverse(z, tol) @ rhs
        residual = numkernel.spectral_norm(z @ sol - rhs)
        scale = max(numkernel.spectral_norm(rhs), 1.0)
        if residual > 1e-8 * scale:
            raise InconsistentSystem(
                f"minimum-norm solve left relative residual {residual / scale:.3e}")
    else:
        sol = numkernel.solve_linear(z, rhs, tol)
    s = sol[:n, :]
    return ScatteringResult(
        energy=energy,
        s=s,
        alpha=sol[n:n + m, :],
        beta=sol[n + m:, :],
        at_eigenvalue=bool(singular),
        unitarity_defect=numkernel.unitarity_defect(s),
    )


def _singularity_ratio(gbc: GlobalBC, k: float) -> float:
    _, _, z = build_xyz(gbc, k * k)
    sigma = np.linalg.svd(z, compute_uv=False)
    if sigma[0] == 0.0:
        return 0.0
    return float(sigma[-1] / sigma[0])


def _golden_minimize(f, lo: float, hi: float, iterations: int = GOLDEN_ITERATIONS):
    c = hi - _GOLDEN * (hi - lo)
    d = lo + _GOLDEN * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(iterations):
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - _GOLDEN * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _GOLDEN * (hi - lo)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def spectrum(gbc: GlobalBC, e_min: float, e_max: float, grid: int | None = None,
             tol: float = SINGULAR_TOL) -> SpectrumResult:
    """Locate the embedded eigenvalues in ``(e_min, e_max]``.

    Scans ``sigma_min(Z)/sigma_max(Z)`` on a grid uniform in ``k = sqrt(E)``,
    refines each local minimum by golden-section search (fixed iteration
    count), merges candidates within 1e-6 relative energy, and accepts a
    candidate when the refined ``sigma_min < tol * sigma_max``.

    Args:
        grid: number of scan points; defaults to about 2000 per unit of
            ``max(lengths) * (sqrt(e_max) - sqrt(e_min))``.

    Raises:
        BadWindow: unless ``0 < e_min < e_max`` and both are finite.
    """
    if not (np.isfinite(e_min) and np.isfinite(e_max)) or not 0.0 < e_min < e_max:
        raise BadWindow(f"need 0 < e_min < e_max, got ({e_min!r}, {e_max!r})")
    boundary.require_valid(gbc.bc)
    if gbc.m == 0:
        # Z(E) = A + ikB is invertible at every positive energy
        return SpectrumResult((), (), (float(e_min), float(e_max)), 0)

    k_lo, k_hi = np.sqrt(e_min), np.sqrt(e_max)
    if grid is None:
        span = max(gbc.lengths) * (k_hi - k_lo)
        grid = int(max(200, np.ceil(GRID_DENSITY * span)))
    elif grid < 3:
        raise BadWindow(f"grid must have at least 3 points, got {grid!r}")
    ks = np.linspace(k_lo, k_hi, grid)
    ratios = np.array([_singularity_ratio(gbc, k) for k in ks])

    prefilter = max(1e-2, 10.0 * tol)
    candidates = []
    for i in range(grid):
        left = ratios[i - 1] if i > 0 else np.inf
        right = ratios[i + 1] if i + 1 < grid else np.inf
        if ratios[i] <= left and ratios[i] <= right and ratios[i] < prefilter:
            lo = ks[max(i - 1, 0)]
            hi = ks[min(i + 1, grid - 1)]
            k_star, r_star = _golden_minimize(
                lambda k: _singularity_ratio(gbc, k), lo, hi)
            if r_star < tol:
                candidates.append((float(k_star ** 2), float(r_star)))

    candidates.sort()
    merged: list[tuple[float, float]] = []
    for e, r in candidates:
        if merged and abs(e - merged[-1][0]) <= MERGE_RELATIVE * max(1.0, e):
            if r < merged[-1][1]:
                merged[-1] = (e, r)
        else:
            merged.append((e, r))

    eigenvalues = tuple(e for e, _ in merged)
    residuals = []
    for e, _ in merged:
        _, _, z = build_xyz(gbc, e)
        residuals.append(float(np.linalg.svd(z, compute_uv=False)[-1]))
    return SpectrumResult(eigenvalues, tuple(residuals),
                          (float(e_min), float(e_max)), grid)


def eigenfunction(gbc: GlobalBC, energy: float, tol: float = SINGULAR_TOL):
    """Orthonormal basis of the kernel of Z(E) as ``(alpha_hat, beta_hat)`` pairs.

    The first ``n`` components of every kernel vector vanish (eigenfunctions
    are supported on the internal lines), so only the interior coefficient
    blocks are returned.

    Raises:
        NotAnEigenvalue: when Z(E) has no numerical kernel at ``tol``.
    """
    energy = _check_energy(energy)
    boundary.require_valid(gbc.bc)
    n, m = gbc.n, gbc.m
    _, _, z = build_xyz(gbc, energy)
    _, sigma, vh = np.linalg.svd(z)
    if sigma[0] == 0.0:
        raise NotAnEigenvalue("Z(E) is the zero matrix; invalid boundary condition")
    kernel = [vh[j].conj() for j in range(len(sigma)) if sigma[j] < tol * sigma[0]]
    if not kernel:
        raise NotAnEigenvalue(
            f"sigma_min/sigma_max = {sigma[-1] / sigma[0]:.3e} at energy {energy!r}, "
            f"not singular at tolerance {tol:g}")
    return [(v[n:n + m].copy(), v[n + m:].copy()) for v in kernel]


def evaluate_wavefunction(gbc: GlobalBC, result: ScatteringResult, channel: int,
                          line: tuple, x: float) -> complex:
    """Value of the scattering solution for an incoming ``channel`` at point
    ``x`` of ``line`` (``("ext", j)`` or ``("int", j)`` by index).

    Raises:
        OutOfDomain: for non-finite or negative ``x``, or ``x`` beyond an
            internal line's length.
    """
    if not 0 <= channel < gbc.n:
        raise ValueError(f"channel must index an external line, got {channel!r}")
    if not np.isfinite(x) or x < 0:
        raise OutOfDomain(f"coordinate must be finite and >= 0, got {x!r}")
    k = np.sqrt(result.energy)
    kind, j = line
    if kind == "ext":
        if not 0 <= j < gbc.n:
            raise ValueError(f"no external line with index {j!r}")
        value = result.s[j, channel] * np.exp(1j * k * x)
        if j == channel:
            value += np.exp(-1j * k * x)
        return complex(value)
    if kind == "int":
        if not 0 <= j < gbc.m:
            raise ValueError(f"no internal line with index {j!r}")
        if x > gbc.lengths[j]:
            raise OutOfDomain(
                f"coordinate {x!r} beyond line length {gbc.lengths[j]!r}")
        return complex(result.alpha[j, channel] * np.exp(1j * k * x)
                       + result.beta[j, channel] * np.exp(-1j * k * x))
    raise ValueError(f"line kind must be 'ext' or 'int', got {kind!r}")


def check_transpose(gbc: GlobalBC, energy: float) -> float:
    """Defect of the transposition identity: conjugating the boundary condition
    transposes the S-matrix.  For real conditions the S-matrix itself is
    symmetric and that stronger identity is included in the defect."""
    res = solve_scattering(gbc, energy)
    conj = GlobalBC(gbc.n, gbc.m, gbc.lengths, gbc.bc.conjugate())
    res_c = solve_scattering(conj, energy)
    defect = numkernel.spectral_norm(res_c.s.T - res.s)
    if boundary.is_real(gbc.bc):
        defect = max(defect, numkernel.spectral_norm(res.s.T - res.s))
    return float(defect)


def check_duality(gbc: GlobalBC, energy: float) -> float:
    """Defect of the length/energy duality.

    The transformed condition ``(-B T, A T)`` with all lengths scaled by E,
    evaluated at energy ``1/E``, must reproduce ``-S``, ``-alpha``, ``beta``.
    Meaningful away from embedded eigenvalues (alpha/beta are unique there).
    """
    energy = _check_energy(energy)
    res = solve_scattering(gbc, energy)
    themed = GlobalBC(
        gbc.n, gbc.m,
        tuple(energy * a for a in gbc.lengths),
        boundary.dual(gbc.bc, gbc.n, gbc.m),
    )
    res_d = solve_scattering(themed, 1.0 / energy)
    return float(max(
        numkernel.spectral_norm(res_d.s + res.s),
        numkernel.spectral_norm(res_d.alpha + res.alpha),
        numkernel.spectral_norm(res_d.beta - res.beta),
    ))


def check_covariance(gbc: GlobalBC, u, energy: float) -> float:
    """Defect of unitary channel covariance.

    Post-composing ``(A, B)`` with ``diag(U, I, I)`` for a unitary ``U`` on the
    external channels maps ``S -> U^{-1} S U``, ``alpha -> alpha U`` and
    ``beta -> beta U``.
    """
    u = numkernel.as_complex_matrix(u, "channel unitary")
    if u.shape != (gbc.n, gbc.n):
        raise boundary.DimensionMismatch(
            f"channel unitary must be {gbc.n} x {gbc.n}, got {u.shape}")
    res = solve_scattering(gbc, energy)
    u_hat = np.eye(gbc.n + 2 * gbc.m, dtype=complex)
    u_hat[:gbc.n, :gbc.n] = u
    transformed = GlobalBC(
        gbc.n, gbc.m, gbc.lengths,
        BoundaryCondition(gbc.bc.A @ u_hat, gbc.bc.B @ u_hat),
    )
    res_t = solve_scattering(transformed, energy)
    return float(max(
        numkernel.spectral_norm(res_t.s - u.conj().T @ res.s @ u),
        numkernel.spectral_norm(res_t.alpha - res.alpha @ u),
        numkernel.spectral_norm(res_t.beta - res.beta @ u),
    ))


def sweep(gbc: GlobalBC, energies, tol: float = SINGULAR_TOL, workers: int = 1):
    """Scattering results over an energy grid, plus transmission probabilities.

    Args:
        energies: iterable of energies, each > 0.
        workers: thread count; results keep grid order regardless.

    Returns:
        ``(results, probabilities)`` where ``probabilities[i, j, k]`` is
        ``|S_jk|^2`` at the i-th energy.
    """
    grid = [float(e) for e in energies]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda e: solve_scattering(gbc, e, tol), grid))
    else:
        results = [solve_scattering(gbc, e, tol) for e in grid]
    probabilities = np.stack([np.abs(r.s) ** 2 for r in results]) if results \
        else np.zeros((0, gbc.n, gbc.n))
    return results, probabilities
