"""Self-adjoint boundary conditions for Laplacians on collections of intervals.

A boundary condition is a pair of square matrices ``(A, B)`` acting on the
vector of endpoint values and inward endpoint derivatives through
``A @ values + B @ derivatives = 0``.  The pair describes a self-adjoint
operator exactly when ``(A, B)`` has maximal rank and ``A @ B^dagger`` is
Hermitian; :func:`validate` measures both properties.

The module also provides the standard named couplings, an equivalence test for
pairs describing the same operator, the canonical (reduced row echelon)
representative, the duality and reality transforms, and the finest splitting of
a condition into independent vertex blocks.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numkernel
from .numkernel import as_complex_matrix

DEFAULT_TOL = 1e-10
# Entries below this absolute size are cleaned to zero in canonical forms
# (rows are pivot-normalized first, so the scale is meaningful).
CANONICAL_ZERO = 1e-12


class DimensionMismatch(ValueError):
    """Raised when two boundary conditions or matrix blocks disagree in size."""


class InvalidBoundaryCondition(ValueError):
    """Raised when an operation requires an admissible boundary condition."""


class InvalidParameters(ValueError):
    """Raised when a named constructor receives out-of-contract parameters."""


@dataclass(frozen=True)
class BoundaryCondition:
    """A pair of N x N matrices defining ``A @ psi + B @ psi' = 0``.

    The arrays are coerced to complex128 and frozen (marked read-only).
    Admissibility is *not* enforced at construction; call :func:`validate`.
    """

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        a = as_complex_matrix(self.A, "A")
        b = as_complex_matrix(self.B, "B")
        if a.shape != b.shape or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(
                f"A and B must be square and equal-shaped, got {a.shape} and {b.shape}")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "B", b)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def conjugate(self) -> "BoundaryCondition":
        """The entrywise complex conjugate pair (A-bar, B-bar)."""
        return BoundaryCondition(self.A.conj(), self.B.conj())


@dataclass(frozen=True)
class ValidationReport:
    rank_ok: bool
    hermitian_ok: bool
    rank_found: int
    hermiticity_defect: float
    is_real_bc: bool

    @property
    def ok(self) -> bool:
        return self.rank_ok and self.hermitian_ok


@dataclass(frozen=True)
class VertexPartition:
    """Disjoint, nonempty endpoint-index blocks covering ``range(dim)``."""

    blocks: tuple[tuple[int, ...], ...]


def validate(bc: BoundaryCondition, tol: float = DEFAULT_TOL) -> ValidationReport:
    """Measure admissibility of ``bc``.

    ``rank_ok`` asks whether the horizontal concatenation ``(A, B)`` has full
    numeric rank N; ``hermitian_ok`` whether ``A @ B^dagger`` is Hermitian up to
    ``tol`` relative to the scale of the product.  ``is_real_bc`` is only
    evaluated for admissible conditions (it is reported False otherwise).
    """
    n = bc.dim
    stacked = np.hstack([bc.A, bc.B])
    rank = numkernel.numeric_rank(stacked, tol)
    defect = numkernel.hermiticity_defect(bc.A @ bc.B.conj().T)
    scale = max(1.0, numkernel.spectral_norm(bc.A) * numkernel.spectral_norm(bc.B))
    rank_ok = rank == n
    hermitian_ok = defect <= tol * scale
    real = False
    if rank_ok and hermitian_ok:
        real = equivalent(bc, bc.conjugate(), tol)
    return ValidationReport(rank_ok, hermitian_ok, rank, defect, real)


def require_valid(bc: BoundaryCondition, tol: float = DEFAULT_TOL) -> None:
    """Raise :class:`InvalidBoundaryCondition` unless ``bc`` is admissible."""
    report = validate(bc, tol)
    if not report.ok:
        raise InvalidBoundaryCondition(
            f"boundary condition is not admissible: rank {report.rank_found} of {bc.dim}, "
            f"hermiticity defect {report.hermiticity_defect:.3e}")


def _rref(m: np.ndarray, pivot_tol: float) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form with partial pivoting, natural column order."""
    m = m.copy()
    rows, cols = m.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        p = r + int(np.argmax(np.abs(m[r:, c])))
        if abs(m[p, c]) <= pivot_tol:
            continue
        if p != r:
            m[[r, p]] = m[[p, r]]
        m[r] = m[r] / m[r, c]
        for other in range(rows):
            if other != r and m[other, c] != 0:
                m[other] = m[other] - m[other, c] * m[r]
        pivots.append(c)
        r += 1
    return m, pivots


def canonicalize(bc: BoundaryCondition, tol: float = DEFAULT_TOL) -> BoundaryCondition:
    """Canonical representative of the equivalence class of ``bc``.

    Computes the reduced row echelon form of the N x 2N block ``[A | B]``,
    preferring pivots in the A columns left to right, then the B columns.  The
    pivot columns of the result form an identity submatrix, entries below
    ``1e-12`` are cleaned to exact zeros, and two equivalent conditions map to
    the same representative.

    Raises:
        InvalidBoundaryCondition: if ``bc`` is not admissible.
    """
    require_valid(bc, tol)
    n = bc.dim
    stacked = np.hstack([bc.A, bc.B])
    scale = np.abs(stacked).max()
    reduced, pivots = _rref(stacked, pivot_tol=CANONICAL_ZERO * max(1.0, scale))
    if len(pivots) != n:
        raise InvalidBoundaryCondition(
            f"found only {len(pivots)} pivots for a rank-{n} condition")
    reduced[np.abs(reduced) < CANONICAL_ZERO] = 0.0
    return BoundaryCondition(reduced[:, :n], reduced[:, n:])


def equivalent(bc1: BoundaryCondition, bc2: BoundaryCondition,
               tol: float = DEFAULT_TOL) -> bool:
    """Whether two admissible pairs define the same boundary condition.

    The criterion is ``A2 @ B1^dagger - B2 @ A1^dagger == 0`` (up to ``tol``
    at the scale of the products), which holds exactly when the two pairs have
    equal solution spaces.
    """
    if bc1.dim != bc2.dim:
        raise DimensionMismatch(
            f"cannot compare boundary conditions of sizes {bc1.dim} and {bc2.dim}")
    cross = bc2.A @ bc1.B.conj().T - bc2.B @ bc1.A.conj().T
    scale = max(
        1.0,
        numkernel.spectral_norm(bc2.A) * numkernel.spectral_norm(bc1.B),
        numkernel.spectral_norm(bc2.B) * numkernel.spectral_norm(bc1.A),
    )
    return numkernel.spectral_norm(cross) <= tol * scale


def dual(bc: BoundaryCondition, n_external: int, m_internal: int) -> BoundaryCondition:
    """Length/energy duality transform ``(A, B) -> (-B T, A T)``.

    ``T`` is diagonal with +1 on the ``n_external + m_internal`` leading
    endpoint slots and -1 on the trailing ``m_internal`` slots (the interval
    far ends).  Applying the transform twice returns an equivalent condition.
    """
    if n_external < 0 or m_internal < 0:
        raise InvalidParameters("external/internal counts must be nonnegative")
    if bc.dim != n_external + 2 * m_internal:
        raise DimensionMismatch(
            f"condition has size {bc.dim}, expected n + 2m = "
            f"{n_external + 2 * m_internal}")
    t = np.ones(bc.dim)
    t[n_external + m_internal:] = -1.0
    return BoundaryCondition(-bc.B * t, bc.A * t)


def is_real(bc: BoundaryCondition, tol: float = DEFAULT_TOL) -> bool:
    """Whether ``bc`` admits a real representative (equivalence with its conjugate)."""
    return equivalent(bc, bc.conjugate(), tol)


def scale_invariant(bc: BoundaryCondition, tol: float = DEFAULT_TOL) -> bool:
    """Whether the S-matrix of ``bc`` is independent of energy.

    Holds exactly when ``A @ B^dagger == 0`` and every row of the canonical
    representative constrains either only values or only derivatives.
    """
    prod_scale = max(
        1.0, numkernel.spectral_norm(bc.A) * numkernel.spectral_norm(bc.B))
    if numkernel.spectral_norm(bc.A @ bc.B.conj().T) > tol * prod_scale:
        return False
    canon = canonicalize(bc, tol)
    for r in range(bc.dim):
        touches_a = bool(np.any(canon.A[r] != 0))
        touches_b = bool(np.any(canon.B[r] != 0))
        if touches_a and touches_b:
            return False
    return True


# --------------------------------------------------------------------------
# named constructors
# --------------------------------------------------------------------------

def dirichlet(n: int) -> BoundaryCondition:
    """Endpoint values pinned to zero: ``(I, 0)``."""
    _check_size(n)
    return BoundaryCondition(np.eye(n), np.zeros((n, n)))


def neumann(n: int) -> BoundaryCondition:
    """Inward derivatives pinned to zero: ``(0, I)``."""
    _check_size(n)
    return BoundaryCondition(np.zeros((n, n)), np.eye(n))


def robin(phi: float) -> BoundaryCondition:
    """Single-endpoint condition ``sin(phi) psi + cos(phi) psi' = 0``."""
    if not np.isfinite(phi):
        raise InvalidParameters(f"angle must be finite, got {phi!r}")
    return BoundaryCondition([[np.sin(phi)]], [[np.cos(phi)]])


def kirchhoff_standard(n: int) -> BoundaryCondition:
    """Continuity of values plus vanishing sum of inward derivatives.

    Rows 0..n-2 force ``psi_j = psi_{j+1}``; the last row forces
    ``sum_j psi'_j = 0``.  For ``n == 1`` this degenerates to a Neumann end.
    """
    _check_size(n)
    a = np.zeros((n, n), dtype=complex)
    b = np.zeros((n, n), dtype=complex)
    for j in range(n - 1):
        a[j, j] = 1.0
        a[j, j + 1] = -1.0
    b[n - 1, :] = 1.0
    return BoundaryCondition(a, b)


def delta_coupling(strength: float, mu: float = 0.0) -> BoundaryCondition:
    """Two-line junction with a point interaction of the given strength."""
    return sl2_coupling(1.0, 0.0, strength, 1.0, mu)


def delta_prime(strength: float) -> BoundaryCondition:
    """Two-line junction coupling values through the derivative jump."""
    return sl2_coupling(1.0, strength, 0.0, 1.0, 0.0)


def sl2_coupling(a: float, b: float, c: float, d: float,
                 mu: float = 0.0) -> BoundaryCondition:
    """Two-line transfer junction with real parameters, ``a d - b c = 1``.

    Channel 1 carries the boundary values on the left-hand side of the
    transfer relation: with inward derivatives,

        ``psi_1(0)  = e^{i mu} (a psi_2(0) - b psi_2'(0))``
        ``psi_1'(0) = e^{i mu} (c psi_2(0) - d psi_2'(0))``

    Raises:
        InvalidParameters: when the determinant condition fails or any
            parameter is non-finite.
    """
    try:
        params = np.array([a, b, c, d, mu], dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidParameters(f"coupling parameters must be real numbers: {exc}")
    if not np.all(np.isfinite(params)):
        raise InvalidParameters("coupling parameters must be finite reals")
    if abs(a * d - b * c - 1.0) > 1e-12:
        raise InvalidParameters(
            f"parameters must satisfy a*d - b*c = 1, got {a * d - b * c!r}")
    emu = np.exp(1j * mu)
    amat = np.array([[-1.0, emu * a], [0.0, emu * c]])
    bmat = np.array([[0.0, -emu * b], [-1.0, -emu * d]])
    return BoundaryCondition(amat, bmat)


def cyclic_coupling(c: float, n: int) -> BoundaryCondition:
    """Nearest-neighbor cyclic coupling ``psi_j + c (psi'_{j-1} + psi'_{j+1}) = 0``.

    ``A`` is the identity and ``B`` the circulant with ``c`` on the two first
    off-diagonals (indices mod n).  Admissible for real ``c``; only odd ``n``
    at least 3 is supported.
    """
    if not isinstance(n, int) or n < 3 or n % 2 == 0:
        raise InvalidParameters(f"size must be an odd integer >= 3, got {n!r}")
    if not np.isfinite(c) or np.iscomplexobj(np.asarray(c)):
        raise InvalidParameters(f"coupling must be a finite real, got {c!r}")
    b = np.zeros((n, n), dtype=complex)
    for j in range(n):
        b[j, (j + 1) % n] = c
        b[j, (j - 1) % n] = c
    return BoundaryCondition(np.eye(n), b)


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed n x n unitary (QR of a complex Gaussian, phases fixed)."""
    z = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) * np.sqrt(0.5)
    q, r = np.linalg.qr(z)
    diag = np.diag(r)
    return q * (diag / np.abs(diag))


def random_bc(n: int, seed) -> BoundaryCondition:
    """Random admissible boundary condition from a Haar unitary.

    Uses ``A = I - U`` and ``B = i (U + I)``, which always has maximal rank
    and Hermitian ``A @ B^dagger``; the result is re-validated before return.
    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    _check_size(n)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    u = random_unitary(n, rng)
    bc = BoundaryCondition(np.eye(n) - u, 1j * (u + np.eye(n)))
    require_valid(bc)
    return bc


def von_neumann_parameter(bc: BoundaryCondition, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Unitary parametrizing ``bc`` among all self-adjoint extensions.

    Computed as the inverse of the unit-energy S-matrix of the shifted pair
    ``(A - B/sqrt(2), B/sqrt(2))``.  Neumann maps to ``iI`` and Dirichlet to
    ``-I``.
    """
    require_valid(bc, tol)
    # The quotient is evaluated with both factors scaled by sqrt(2), which
    # leaves it unchanged but makes the B coefficients exact in floating
    # point (the named special cases then come out exact, not just close).
    m = np.sqrt(2.0) * bc.A - (1.0 - 1.0j) * bc.B
    n = np.sqrt(2.0) * bc.A - (1.0 + 1.0j) * bc.B
    s_one = -numkernel.solve_linear(m, n)
    return s_one.conj().T


def localize(bc: BoundaryCondition, tol: float = DEFAULT_TOL) -> VertexPartition:
    """Finest splitting of ``bc`` into independent endpoint blocks.

    Two endpoints belong to the same block when some row of the canonical
    representative touches both (in either the value or the derivative
    column).  Endpoints untouched by every row become singleton blocks.
    Blocks are sorted by their smallest endpoint index.
    """
    canon = canonicalize(bc, tol)
    n = bc.dim
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x: int, y: int) -> None:
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[ry] = rx

    touched = np.abs(canon.A) > 0
    touched |= np.abs(canon.B) > 0
    for r in range(n):
        cols = np.flatnonzero(touched[r])
        for c in cols[1:]:
            union(int(cols[0]), int(c))
    groups: dict[int, list[int]] = {}
    for j in range(n):
        groups.setdefault(find(j), []).append(j)
    blocks = sorted((tuple(sorted(g)) for g in groups.values()), key=lambda b: b[0])
    return VertexPartition(tuple(blocks))


def _check_size(n: int) -> None:
    if not isinstance(n, int) or n < 1:
        raise InvalidParameters(f"size must be a positive integer, got {n!r}")
