"""Bures-Wasserstein geometry on symmetric positive definite matrices.

Distances, optimal-transport maps between SPD matrices, and the differential
of the transport map in its base point, together with a fixed orthonormal
coordinate system for the space of symmetric matrices that the rest of the
package shares.

All matrices are real, validated to be symmetric within a relative tolerance
of 1e-12 (and symmetrized), with eigenvalues required to exceed
``eps_pd`` relative to the largest eigenvalue (default 1e-10).
"""

import functools

import numpy as np

from .errors import IllConditionedError, InvalidInputError, SingularError

EPS_PD = 1e-10

_SYM_RTOL = 1e-12


def sym_part(a):
    """Symmetric part (a + a.T) / 2, applied over the last two axes."""
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _as_square(a, name):
    try:
        a = np.asarray(a, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"{name}: not a real matrix: {exc}") from None
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"{name}: expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name}: non-finite entries")
    return a


def _validated_eigh(a, eps_pd, name):
    """Symmetrize, eigendecompose and enforce positive definiteness."""
    a = _as_square(a, name)
    scale = np.abs(a).max()
    if scale > 0 and np.abs(a - a.T).max() > _SYM_RTOL * scale:
        raise InvalidInputError(f"{name}: not symmetric within relative tolerance {_SYM_RTOL}")
    a = sym_part(a)
    vals, vecs = np.linalg.eigh(a)
    if vals[0] <= eps_pd * max(vals[-1], 0.0):
        raise IllConditionedError(
            f"{name}: not positive definite at relative threshold {eps_pd} "
            f"(eigenvalue range [{vals[0]:.6g}, {vals[-1]:.6g}])"
        )
    return a, vals, vecs


def check_spd(a, eps_pd=EPS_PD, name="matrix"):
    """Validate a symmetric positive definite matrix.

    Returns the symmetrized matrix. Raises ``InvalidInputError`` for shape,
    finiteness or symmetry violations and ``IllConditionedError`` when the
    smallest eigenvalue does not exceed ``eps_pd`` times the largest.
    """
    a, _, _ = _validated_eigh(a, eps_pd, name)
    return a


def sym_sqrt(a, eps_pd=EPS_PD):
    """Principal matrix square root of an SPD matrix via eigendecomposition."""
    _, vals, vecs = _validated_eigh(a, eps_pd, "sym_sqrt")
    return sym_part((vecs * np.sqrt(vals)) @ vecs.T)


def _sqrt_pair(vals, vecs):
    # square root and inverse square root from one eigendecomposition
    r = np.sqrt(vals)
    w = (vecs * r) @ vecs.T
    wi = (vecs / r) @ vecs.T
    return sym_part(w), sym_part(wi)


def wasserstein_distance(a, b, eps_pd=EPS_PD):
    """Bures-Wasserstein distance between two SPD matrices.

    W(A, B) = [tr A + tr B - 2 tr (A^{1/2} B A^{1/2})^{1/2}]^{1/2},
    with the bracket clamped at zero before the outer square root so that
    nearly identical inputs cannot produce NaN.
    """
    a, va, ua = _validated_eigh(a, eps_pd, "wasserstein_distance: first argument")
    b, _, _ = _validated_eigh(b, eps_pd, "wasserstein_distance: second argument")
    if a.shape != b.shape:
        raise InvalidInputError(
            f"wasserstein_distance: dimension mismatch {a.shape} vs {b.shape}"
        )
    w, _ = _sqrt_pair(va, ua)
    cross = np.sqrt(np.clip(np.linalg.eigvalsh(w @ b @ w), 0.0, None)).sum()
    sq = np.trace(a) + np.trace(b) - 2.0 * cross
    return float(np.sqrt(max(sq, 0.0)))


def ot_map(base, target, eps_pd=EPS_PD):
    """Optimal-transport map T from ``base`` to ``target``.

    T = base^{-1/2} (base^{1/2} target base^{1/2})^{1/2} base^{-1/2}; T is
    symmetric positive definite and satisfies T base T = target.
    """
    base, vb, ub = _validated_eigh(base, eps_pd, "ot_map: base")
    target, _, _ = _validated_eigh(target, eps_pd, "ot_map: target")
    if base.shape != target.shape:
        raise InvalidInputError(f"ot_map: dimension mismatch {base.shape} vs {target.shape}")
    w, wi = _sqrt_pair(vb, ub)
    mid = sym_part(w @ target @ w)
    mv, mu = np.linalg.eigh(mid)
    root = (mu * np.sqrt(np.clip(mv, 0.0, None))) @ mu.T
    return sym_part(wi @ root @ wi)


def solve_sylvester(a, b, c):
    """Solve X A + B X = C for square A, B via eigendecompositions.

    A and B need not be symmetric but must be diagonalizable with no
    eigenvalue collision lam_i(A) + lam_j(B) ~ 0; a collision raises
    ``SingularError``. The computed solution is verified against the
    residual; an inaccurate solve raises ``IllConditionedError``.
    """
    a = _as_square(a, "solve_sylvester: A")
    b = _as_square(b, "solve_sylvester: B")
    c = np.asarray(c, dtype=float)
    if c.shape != (b.shape[0], a.shape[0]):
        raise InvalidInputError(
            f"solve_sylvester: C must have shape {(b.shape[0], a.shape[0])}, got {c.shape}"
        )
    if not np.all(np.isfinite(c)):
        raise InvalidInputError("solve_sylvester: C has non-finite entries")
    la, va = np.linalg.eig(a)
    lb, vb = np.linalg.eig(b)
    denom = lb[:, None] + la[None, :]
    scale = max(np.abs(la).max(), np.abs(lb).max(), 1e-300)
    if np.abs(denom).min() < 1e-12 * scale:
        raise SingularError(
            "solve_sylvester: eigenvalue collision makes the equation singular"
        )
    chat = np.linalg.solve(vb, c.astype(complex) @ va)
    y = chat / denom
    x = np.linalg.solve(va.T, (vb @ y).T).T
    x = np.real_if_close(x, tol=1e6)
    if np.iscomplexobj(x):
        x = x.real
    resid = np.linalg.norm(x @ a + b @ x - c)
    ref = max(np.linalg.norm(c), np.linalg.norm(x) * scale, 1e-300)
    if resid > 1e-8 * ref:
        raise IllConditionedError(
            f"solve_sylvester: residual {resid:.3g} exceeds tolerance (ill-conditioned eigenbasis)"
        )
    return x


# ---------------------------------------------------------------------------
# coordinates on the space of symmetric matrices
# ---------------------------------------------------------------------------

def sym_dim(d):
    """Dimension d(d+1)/2 of the space of symmetric d x d matrices."""
    return d * (d + 1) // 2


@functools.lru_cache(maxsize=None)
def _offdiag_indices(d):
    r, c = np.triu_indices(d, k=1)
    r.flags.writeable = False
    c.flags.writeable = False
    return r, c


@functools.lru_cache(maxsize=None)
def sym_basis(d):
    """Orthonormal basis of symmetric d x d matrices, shape (m, d, d).

    Diagonal units E_ii first (i ascending), then (E_ij + E_ji)/sqrt(2) for
    i < j in lexicographic order. Cached and read-only.
    """
    if d < 1:
        raise InvalidInputError(f"sym_basis: d must be positive, got {d}")
    m = sym_dim(d)
    basis = np.zeros((m, d, d))
    idx = np.arange(d)
    basis[idx, idx, idx] = 1.0
    r, c = _offdiag_indices(d)
    off = np.arange(d, m)
    s = 1.0 / np.sqrt(2.0)
    basis[off, r, c] = s
    basis[off, c, r] = s
    basis.flags.writeable = False
    return basis


def sym_coords(h):
    """Coordinates of symmetric matrices in the fixed basis.

    Accepts (..., d, d); returns (..., m). Near-symmetric input is projected
    onto its symmetric part.
    """
    h = np.asarray(h, dtype=float)
    d = h.shape[-1]
    r, c = _offdiag_indices(d)
    idx = np.arange(d)
    diag = h[..., idx, idx]
    off = (h[..., r, c] + h[..., c, r]) * (0.5 * np.sqrt(2.0))
    return np.concatenate([diag, off], axis=-1)


def sym_from_coords(v, d=None):
    """Inverse of :func:`sym_coords`; accepts (..., m), returns (..., d, d)."""
    v = np.asarray(v, dtype=float)
    m = v.shape[-1]
    if d is None:
        d = int((np.sqrt(8 * m + 1) - 1) / 2 + 0.5)
    if sym_dim(d) != m:
        raise InvalidInputError(f"sym_from_coords: length {m} is not a triangular number")
    out = np.zeros(v.shape[:-1] + (d, d))
    idx = np.arange(d)
    out[..., idx, idx] = v[..., :d]
    r, c = _offdiag_indices(d)
    off = v[..., d:] / np.sqrt(2.0)
    out[..., r, c] = off
    out[..., c, r] = off
    return out


class SymOperator:
    """Linear operator on symmetric d x d matrices in the fixed basis.

    Stored as a dense m x m matrix with m = d(d+1)/2, acting on
    :func:`sym_coords` coordinate vectors. The matrix need not be symmetric
    (composition of self-adjoint operators is not).
    """

    __slots__ = ("dim", "matrix")

    def __init__(self, dim, matrix):
        matrix = np.asarray(matrix, dtype=float)
        m = sym_dim(int(dim))
        if matrix.shape != (m, m):
            raise InvalidInputError(
                f"SymOperator: matrix shape {matrix.shape} does not match dim {dim}"
            )
        if not np.all(np.isfinite(matrix)):
            raise InvalidInputError("SymOperator: non-finite entries")
        self.dim = int(dim)
        self.matrix = matrix

    @classmethod
    def identity(cls, dim):
        return cls(dim, np.eye(sym_dim(dim)))

    def apply(self, h):
        """Apply to one symmetric matrix or a stack (..., d, d)."""
        h = np.asarray(h, dtype=float)
        if h.shape[-2:] != (self.dim, self.dim):
            raise InvalidInputError(
                f"SymOperator.apply: expected trailing shape {(self.dim, self.dim)}, got {h.shape}"
            )
        return sym_from_coords(sym_coords(h) @ self.matrix.T, self.dim)

    def compose(self, other):
        """self after other."""
        if not isinstance(other, SymOperator) or other.dim != self.dim:
            raise InvalidInputError("SymOperator.compose: dimension mismatch")
        return SymOperator(self.dim, self.matrix @ other.matrix)

    __matmul__ = compose

    def is_symmetric(self, rtol=1e-10):
        scale = max(np.abs(self.matrix).max(), 1e-300)
        return np.abs(self.matrix - self.matrix.T).max() <= rtol * scale

    def eigenvalues(self):
        """Spectrum of the operator; real ascending when self-adjoint."""
        if self.is_symmetric(rtol=1e-8):
            return np.linalg.eigvalsh(sym_part(self.matrix))
        return np.linalg.eigvals(self.matrix)

    def pinv(self, rel_threshold=EPS_PD):
        """Thresholded pseudo-inverse of a self-adjoint operator.

        Eigenmodes with |eigenvalue| <= rel_threshold * max |eigenvalue| are
        inverted to zero. Returns (operator, number of dropped modes).
        """
        vals, vecs = np.linalg.eigh(sym_part(self.matrix))
        cut = rel_threshold * max(np.abs(vals).max(), 0.0)
        keep = np.abs(vals) > cut
        inv = np.zeros_like(vals)
        inv[keep] = 1.0 / vals[keep]
        mat = (vecs * inv) @ vecs.T
        return SymOperator(self.dim, sym_part(mat)), int((~keep).sum())

    def to_dict(self):
        return {"dim": self.dim, "matrix": [float(x) for x in self.matrix.ravel()]}

    @classmethod
    def from_dict(cls, payload):
        try:
            dim = int(payload["dim"])
            mat = np.asarray(payload["matrix"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"SymOperator.from_dict: {exc}") from None
        m = sym_dim(dim)
        if mat.size != m * m:
            raise InvalidInputError("SymOperator.from_dict: matrix size mismatch")
        return cls(dim, mat.reshape(m, m))

    def __repr__(self):
        return f"SymOperator(dim={self.dim})"


# ---------------------------------------------------------------------------
# transport maps and base-point differentials, batched over targets
# ---------------------------------------------------------------------------

class TransportBatch:
    """OT maps and base-point differentials from one base to many targets.

    Shares the eigendecompositions of the base and of the congruences
    base^{1/2} Q_i base^{1/2} between the maps and the differentials; this is
    the workhorse behind the regression solver caches and the operator
    assembly. Targets are assumed symmetric and positive semidefinite
    (eigenvalues of the congruence are clipped at zero); the base is
    validated strictly.
    """

    def __init__(self, base, targets, eps_pd=EPS_PD):
        base, vals, vecs = _validated_eigh(base, eps_pd, "TransportBatch: base")
        targets = np.asarray(targets, dtype=float)
        if targets.ndim == 2:
            targets = targets[None]
        if targets.ndim != 3 or targets.shape[-2:] != base.shape:
            raise InvalidInputError(
                f"TransportBatch: targets shape {targets.shape} incompatible with base {base.shape}"
            )
        self.d = base.shape[0]
        self.w, self.wi = _sqrt_pair(vals, vecs)
        mid = sym_part(self.w @ targets @ self.w)
        mu, v = np.linalg.eigh(mid)
        self.sqrt_mu = np.sqrt(np.clip(mu, 0.0, None))  # (k, d)
        self.vecs = v                                   # (k, d, d)

    def maps(self, idx=None):
        """Transport maps T_i with T_i base T_i = Q_i, shape (k, d, d)."""
        v, s = self.vecs, self.sqrt_mu
        if idx is not None:
            v, s = v[idx], s[idx]
        core = (v * s[:, None, :]) @ v.transpose(0, 2, 1)
        return sym_part(self.wi @ core @ self.wi)

    def dt_factors(self, idx=None):
        """Factors (cong, gamma) of the base-point differentials.

        The differential of the transport map in its base point acts as
        dT_i[H] = -K_i ((K_i^T H K_i) o Gamma_i) K_i^T with K_i = base^{-1/2} V_i
        and Gamma_ab = sqrt(mu_a mu_b) / (sqrt(mu_a) + sqrt(mu_b)); this is the
        unique solution of dT (S T_i) + (T_i S) dT = -T_i H T_i.

        Returns ``cong`` of shape (k, m, m) with cong[i, j] = sym_coords(
        K_i^T B_j K_i) for the fixed basis elements B_j, and ``gamma`` of
        shape (k, m), the Hadamard multipliers packed in coordinate order.
        The operator matrix of dT_i is -cong_i diag(gamma_i) cong_i^T.
        """
        v, s = self.vecs, self.sqrt_mu
        if idx is not None:
            v, s = v[idx], s[idx]
        d = self.d
        k = self.wi @ v                                 # (k, d, d)
        denom = s[:, :, None] + s[:, None, :]
        num = s[:, :, None] * s[:, None, :]
        gam = np.where(denom > 0.0, num / np.where(denom > 0.0, denom, 1.0), 0.0)
        idx_d = np.arange(d)
        r, c = _offdiag_indices(d)
        gamma = np.concatenate([gam[:, idx_d, idx_d], gam[:, r, c]], axis=-1)
        basis = sym_basis(d)
        kt = k.transpose(0, 2, 1)
        prods = kt[:, None] @ basis[None] @ k[:, None]  # (k, m, d, d)
        cong = sym_coords(prods)                        # (k, m, m)
        return cong, gamma


def weighted_dt_matrix(cong, gamma, coeffs):
    """Matrix of sum_i coeffs[i] * dT_i from :meth:`TransportBatch.dt_factors`."""
    coeffs = np.asarray(coeffs, dtype=float)
    scaled = cong * (coeffs[:, None, None] * gamma[:, None, :])
    mat = -np.tensordot(scaled, cong, axes=([0, 2], [0, 2]))
    return sym_part(mat)


def ot_map_differential(base, target, eps_pd=EPS_PD):
    """Differential of the transport map in its base point, as a SymOperator.

    For T = ot_map(base, target), the returned operator maps a symmetric
    perturbation H of the base to the solution dT[H] of
    dT (base T) + (T base) dT = -T H T. Self-adjoint with nonpositive
    spectrum when target is positive definite.
    """
    target = check_spd(target, eps_pd, "ot_map_differential: target")
    batch = TransportBatch(base, target[None], eps_pd)
    cong, gamma = batch.dt_factors()
    return SymOperator(batch.d, weighted_dt_matrix(cong, gamma, np.ones(1)))
