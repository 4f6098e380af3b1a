"""
Mixed-model reparameterization of the anisotropic tensor-product penalty.

The marginal penalty grams are diagonalized simultaneously, which splits the surface
coefficients ``theta`` into an unpenalized block ``beta`` (the null space) and a penalized
block ``delta`` whose prior precision is the diagonal matrix ``lambda_x Psi_x + lambda_t Psi_t``.
Coefficients are ordered with the `x` basis index outer, i.e. ``theta[j * Kt + k]``.
"""

from __future__ import annotations

import numpy as np

from ..helpers.auxiliary import FloatArray
from ..helpers.basis import difference_matrix


#: Eigenvalues below this fraction of the largest eigenvalue count as zero.
ZERO_EIGENVALUE_RTOL = 1e-10


class PenaltyPair:
    """
    Kronecker-structured marginal penalties ``Px = DxᵀDx ⊗ I`` and ``Pt = I ⊗ DtᵀDt``.

    Parameters
    ----------
    gram_x : numpy.ndarray
        Marginal gram ``DxᵀDx`` of shape ``(Kx, Kx)``.
    gram_t : numpy.ndarray
        Marginal gram ``DtᵀDt`` of shape ``(Kt, Kt)``.
    """

    def __init__(self, gram_x: FloatArray, gram_t: FloatArray) -> None:
        self.gram_x = np.asarray(gram_x, dtype=float)
        self.gram_t = np.asarray(gram_t, dtype=float)
        self.kx = self.gram_x.shape[0]
        self.kt = self.gram_t.shape[0]
        self.px = np.kron(self.gram_x, np.eye(self.kt))
        self.pt = np.kron(np.eye(self.kx), self.gram_t)

    def combined(self, lambda_x: float, lambda_t: float) -> FloatArray:
        """
        Full penalty matrix ``lambda_x Px + lambda_t Pt``.

        Parameters
        ----------
        lambda_x : float
            Smoothing parameter along the trajectory-value axis.
        lambda_t : float
            Smoothing parameter along the time axis.

        Returns
        -------
        numpy.ndarray
            Symmetric positive semi-definite matrix of size ``Kx * Kt``.
        """
        return lambda_x * self.px + lambda_t * self.pt

    def __repr__(self) -> str:
        return f"PenaltyPair(kx={self.kx}, kt={self.kt})"


def build_penalties(kx: int, kt: int, dx: int, dt: int) -> PenaltyPair:
    """
    Build the tensor-product penalties from marginal difference operators.

    Parameters
    ----------
    kx : int
        Number of basis functions along the trajectory-value axis.
    kt : int
        Number of basis functions along the time axis.
    dx : int
        Difference order along the trajectory-value axis.
    dt : int
        Difference order along the time axis.

    Returns
    -------
    PenaltyPair
        The pair ``(Px, Pt)``.

    Raises
    ------
    ValueError
        If a difference order is not in ``[1, K)``.
    """
    return PenaltyPair(difference_matrix(kx, dx).gram, difference_matrix(kt, dt).gram)


def _marginal_spectrum(gram: FloatArray, name: str) -> tuple[FloatArray, FloatArray]:
    if not np.allclose(gram, gram.T, rtol=0.0, atol=1e-12):
        raise ValueError(f"Invalid {name}: matrix is not symmetric.")
    values, vectors = np.linalg.eigh(gram)
    order = np.argsort(-values, kind="stable")
    values, vectors = values[order], vectors[:, order]
    scale = max(float(values[0]), 0.0)
    if values[-1] < -1e-8 * max(scale, 1.0):
        raise ValueError(f"Invalid {name}: matrix is not positive semi-definite (smallest eigenvalue {values[-1]}).")
    values = np.where(values < ZERO_EIGENVALUE_RTOL * scale, 0.0, values)
    return values, vectors


class ReparamBasis:
    """
    Transform ``T = [T0 : Tp]`` taking ``(beta, delta)`` to surface coefficients ``theta``.

    Parameters
    ----------
    penalties : PenaltyPair
        Marginal penalties the transform diagonalizes.
    eigvecs : numpy.ndarray
        Orthonormal eigenvectors ``Vx ⊗ Vt`` in coefficient ordering.
    s_tilde : numpy.ndarray
        Sums ``s_x + s_t`` of marginal eigenvalues for every coefficient pair.
    s_x : numpy.ndarray
        Marginal ``x`` eigenvalue for every coefficient pair.
    s_t : numpy.ndarray
        Marginal ``t`` eigenvalue for every coefficient pair.

    Notes
    -----
    Penalized columns are ``Tp = V_p S̃^{-1/2}`` so that ``TpᵀPxTp = diag(psi_x)`` and
    ``TpᵀPtTp = diag(psi_t)`` with ``psi_x + psi_t = 1``.
    """

    def __init__(self, penalties: PenaltyPair, eigvecs: FloatArray, s_tilde: FloatArray, s_x: FloatArray, s_t: FloatArray) -> None:
        self.penalties = penalties
        self.null_mask = s_tilde == 0.0
        self.eigvecs = eigvecs
        self.s_tilde = s_tilde[~self.null_mask]
        self.psi_x = s_x[~self.null_mask] / self.s_tilde
        self.psi_t = s_t[~self.null_mask] / self.s_tilde
        self.t0 = eigvecs[:, self.null_mask]
        self.tp = eigvecs[:, ~self.null_mask] / np.sqrt(self.s_tilde)

    @property
    def num_coefficients(self) -> int:
        """Length of ``theta``."""
        return int(self.eigvecs.shape[0])

    @property
    def n_null(self) -> int:
        """Length of ``beta``, equal to ``dx * dt``."""
        return int(self.t0.shape[1])

    @property
    def n_penalized(self) -> int:
        """Length of ``delta``."""
        return int(self.tp.shape[1])

    @property
    def transform(self) -> FloatArray:
        """The square matrix ``T = [T0 : Tp]``."""
        return np.hstack([self.t0, self.tp])

    def t_inverse(self) -> FloatArray:
        """
        Explicit inverse ``T^{-1} = [T0 : V_p S̃^{1/2}]ᵀ``.

        Returns
        -------
        numpy.ndarray
            Square matrix mapping ``theta`` to ``(beta, delta)``.
        """
        scaled = self.eigvecs[:, ~self.null_mask] * np.sqrt(self.s_tilde)
        return np.hstack([self.t0, scaled]).T

    def precision(self, lambda_x: float, lambda_t: float) -> FloatArray:
        """
        Diagonal of the prior precision of ``delta``.

        Parameters
        ----------
        lambda_x : float
            Smoothing parameter along the trajectory-value axis.
        lambda_t : float
            Smoothing parameter along the time axis.

        Returns
        -------
        numpy.ndarray
            ``lambda_x * psi_x + lambda_t * psi_t``.
        """
        return lambda_x * self.psi_x + lambda_t * self.psi_t

    def split_design_row(self, z: FloatArray) -> tuple[FloatArray, FloatArray]:
        """Alias of :py:func:`split_design_row` bound to this basis."""
        return split_design_row(z, self)

    def reconstruct_theta(self, beta: FloatArray, delta: FloatArray) -> FloatArray:
        """Alias of :py:func:`reconstruct_theta` bound to this basis."""
        return reconstruct_theta(beta, delta, self)

    def __repr__(self) -> str:
        return f"ReparamBasis(kx={self.penalties.kx}, kt={self.penalties.kt}, n_null={self.n_null}, n_penalized={self.n_penalized})"


def diagonalize(penalties: PenaltyPair, gram_x: FloatArray | None = None, gram_t: FloatArray | None = None) -> ReparamBasis:
    """
    Simultaneously diagonalize the marginal penalties.

    Parameters
    ----------
    penalties : PenaltyPair
        Kronecker penalties to diagonalize.
    gram_x : numpy.ndarray, optional
        Marginal gram along `x`; defaults to ``penalties.gram_x``.
    gram_t : numpy.ndarray, optional
        Marginal gram along `t`; defaults to ``penalties.gram_t``.

    Returns
    -------
    ReparamBasis
        Transform with eigenvalues sorted in descending order (ties by index).

    Raises
    ------
    ValueError
        If a marginal gram is not symmetric positive semi-definite.
    RuntimeError
        If the congruence check fails (only with ``__debug__``).
    """
    gram_x = penalties.gram_x if gram_x is None else np.asarray(gram_x, dtype=float)
    gram_t = penalties.gram_t if gram_t is None else np.asarray(gram_t, dtype=float)
    sx, vx = _marginal_spectrum(gram_x, "gram_x")
    st, vt = _marginal_spectrum(gram_t, "gram_t")

    s_x = np.repeat(sx, st.size)
    s_t = np.tile(st, sx.size)
    basis = ReparamBasis(penalties, np.kron(vx, vt), s_x + s_t, s_x, s_t)

    if __debug__:
        transform = basis.transform
        n0 = basis.n_null
        for pen, psi in ((penalties.px, basis.psi_x), (penalties.pt, basis.psi_t)):
            expected = np.zeros_like(transform)
            expected[n0:, n0:] = np.diag(psi)
            if not np.allclose(transform.T @ pen @ transform, expected, rtol=0.0, atol=1e-8):
                raise RuntimeError("Reparameterization does not diagonalize the marginal penalties.")
    return basis


def split_design_row(z: FloatArray, basis: ReparamBasis) -> tuple[FloatArray, FloatArray]:
    """
    Split design rows into unpenalized and penalized parts.

    Parameters
    ----------
    z : numpy.ndarray
        Design row of length ``Kx * Kt`` or a stack of rows ``(n, Kx * Kt)``.
    basis : ReparamBasis
        The reparameterization.

    Returns
    -------
    tuple of (numpy.ndarray, numpy.ndarray)
        ``z T0`` and ``z Tp``.

    Raises
    ------
    ValueError
        If the row length does not match the basis.
    """
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != basis.num_coefficients:
        raise ValueError(f"Invalid design row length: {z.shape[-1]}. Must be {basis.num_coefficients}.")
    return z @ basis.t0, z @ basis.tp


def reconstruct_theta(beta: FloatArray, delta: FloatArray, basis: ReparamBasis) -> FloatArray:
    """
    Surface coefficients ``theta = T0 beta + Tp delta``.

    Parameters
    ----------
    beta : numpy.ndarray
        Null-space coefficients, shape ``(n_null,)`` or stacked ``(S, n_null)``.
    delta : numpy.ndarray
        Penalized coefficients, shape ``(n_penalized,)`` or stacked ``(S, n_penalized)``.
    basis : ReparamBasis
        The reparameterization.

    Returns
    -------
    numpy.ndarray
        ``theta`` with the leading shape of the inputs.

    Raises
    ------
    ValueError
        If the lengths do not match the basis.
    """
    beta = np.asarray(beta, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if beta.shape[-1] != basis.n_null or delta.shape[-1] != basis.n_penalized:
        raise ValueError(
            f"Invalid coefficient lengths: beta {beta.shape[-1]}, delta {delta.shape[-1]}. Must be {basis.n_null} and {basis.n_penalized}."
        )
    return beta @ basis.t0.T + delta @ basis.tp.T
