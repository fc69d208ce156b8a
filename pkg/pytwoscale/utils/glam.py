"""
Array arithmetic for tensor-product B-spline models on a grid (GLAM).

The regression matrix of a two dimensional model on an ``n_u x n_s`` grid
is ``B = Bs kron Bu``. None of the functions here form ``B``: they work
with the marginal bases and the row tensors of them.

Coefficients, linear predictors, weights and covariances are redimensioned
with the column-major ``vec`` (columns stacked), so coefficient ``(l, q)``
of the ``c_u x c_s`` matrix ``A`` sits at position ``q * c_u + l``.
"""
import numpy as np


def _values(basis):
    return np.asarray(getattr(basis, 'values', basis), dtype=float)


def vec(matrix):
    """Stacks the columns of ``matrix`` into a vector."""
    return np.asarray(matrix).ravel(order='F')


def unvec(vector, n_rows, n_cols):
    """Inverse of ``vec``."""
    return np.asarray(vector).reshape((n_rows, n_cols), order='F')


def row_tensor(B):
    """
    Row tensor of a basis matrix: row ``j`` holds the flattened outer
    product of row ``j`` of ``B`` with itself, so entry
    ``(j, l * c + m)`` is ``B[j, l] * B[j, m]``.

    Parameters
    ----------
    B : BasisMatrix or numpy array, ``n x c``

    Returns
    -------
    phi : numpy array, ``n x c**2``
    """
    B = _values(B)
    n, c = B.shape
    phi = np.zeros((n, c, c))
    # B-spline rows are banded: multiply only the nonzero columns
    nz = B != 0.0
    if nz.any():
        first = np.where(nz.any(axis=1), nz.argmax(axis=1), 0)
        last = np.where(nz.any(axis=1), c - 1 - nz[:, ::-1].argmax(axis=1), -1)
        width = int((last - first).max()) + 1
        if width < c:
            for j in range(n):
                band = slice(first[j], last[j] + 1)
                phi[j, band, band] = np.outer(B[j, band], B[j, band])
            return phi.reshape(n, c * c)
    phi = B[:, :, None] * B[:, None, :]
    return phi.reshape(n, c * c)


def _check_grid(Bu, Bs, *arrays):
    shape = (Bu.shape[0], Bs.shape[0])
    for arr in arrays:
        if np.shape(arr) != shape:
            raise ValueError(f"array of shape {np.shape(arr)} does not match "
                             f"the {shape[0]} x {shape[1]} bin grid")


def inner_product_2d(Bu, Bs, W):
    """
    Weighted inner product ``B' diag(vec W) B`` of the tensor basis
    ``B = Bs kron Bu``.

    Parameters
    ----------
    Bu, Bs : BasisMatrix or numpy arrays
        Marginal bases, ``n_u x c_u`` and ``n_s x c_s``.
    W : numpy array, ``n_u x n_s``
        Non-negative weights.

    Returns
    -------
    G : numpy array, ``c_u c_s x c_u c_s``
    """
    Bu = _values(Bu)
    Bs = _values(Bs)
    W = np.asarray(W, dtype=float)
    _check_grid(Bu, Bs, W)
    c_u = Bu.shape[1]
    c_s = Bs.shape[1]

    T = row_tensor(Bu).T @ W @ row_tensor(Bs)
    # T[(l, m), (q, r)] -> G[(q, l), (r, m)]
    G = T.reshape(c_u, c_u, c_s, c_s).transpose(2, 0, 3, 1)
    G = G.reshape(c_u * c_s, c_u * c_s)
    return (G + G.T) / 2


def rhs_2d(Bu, Bs, Y, M, E):
    """
    Right-hand side of the IWLS equations,
    ``vec(Bu' ((Y - M) + M * E) Bs)``.

    Parameters
    ----------
    Bu, Bs : BasisMatrix or numpy arrays
    Y : numpy array, ``n_u x n_s``
        Event counts.
    M : numpy array, ``n_u x n_s``
        Current expected counts.
    E : numpy array, ``n_u x n_s``
        Current linear predictor.

    Returns
    -------
    rhs : numpy array of length ``c_u c_s``
    """
    Bu = _values(Bu)
    Bs = _values(Bs)
    _check_grid(Bu, Bs, Y, M, E)
    Z = (np.asarray(Y) - M) + M * E
    return vec(Bu.T @ Z @ Bs)


def linear_predictor_2d(Bu, A, Bs):
    """
    Linear predictor ``E = Bu A Bs'`` on the grid.
    """
    Bu = _values(Bu)
    Bs = _values(Bs)
    A = np.asarray(A, dtype=float)
    if A.shape != (Bu.shape[1], Bs.shape[1]):
        raise ValueError(f"coefficient matrix of shape {A.shape} does not "
                         f"match bases with {Bu.shape[1]} and {Bs.shape[1]} "
                         "columns")
    return Bu @ A @ Bs.T


def variance_diag_2d(Bu, Bs, V):
    """
    Pointwise variances ``diag(B V B')`` of the linear predictor on the
    grid, arranged as an ``n_u x n_s`` array.

    Parameters
    ----------
    Bu, Bs : BasisMatrix or numpy arrays
    V : numpy array, ``c_u c_s x c_u c_s``
        Covariance of ``vec(A)``.

    Returns
    -------
    var : numpy array, ``n_u x n_s``
    """
    Bu = _values(Bu)
    Bs = _values(Bs)
    V = np.asarray(V, dtype=float)
    c_u = Bu.shape[1]
    c_s = Bs.shape[1]
    if V.shape != (c_u * c_s, c_u * c_s):
        raise ValueError(f"covariance of shape {V.shape} does not match "
                         f"{c_u * c_s} coefficients")

    # V[(q, l), (r, m)] -> S[(l, m), (q, r)]
    S = V.reshape(c_s, c_u, c_s, c_u).transpose(1, 3, 0, 2)
    S = S.reshape(c_u * c_u, c_s * c_s)
    return row_tensor(Bu) @ S @ row_tensor(Bs).T


def row_kronecker(Bu, Bs):
    """
    Rows of the tensor basis at scattered points: row ``i`` is
    ``Bs[i] kron Bu[i]``.

    Use this for a modest number of evaluation points; on a full grid
    use the functions above.
    """
    Bu = _values(Bu)
    Bs = _values(Bs)
    if Bu.shape[0] != Bs.shape[0]:
        raise ValueError("bases must be evaluated at the same number of "
                         "points")
    n = Bu.shape[0]
    return (Bs[:, :, None] * Bu[:, None, :]).reshape(n, -1)
