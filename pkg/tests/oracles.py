"""Brute-force dense referees for the test suite.

Nothing here calls the package's kernels, sparse assembly or linear algebra
helpers.  Problem coefficients are taken from ``problem.coefficients`` (they
are the PDE data, not a kernel); everything downstream of them is redone
densely with explicit loops.
"""
import numpy as np

MAX_DENSE = 5000


def _q1_tables(hx, hy):
    g = 1.0 / np.sqrt(3.0)
    pts = [(-g, -g), (g, -g), (g, g), (-g, g)]
    corners = [(-1, -1), (1, -1), (1, 1), (-1, 1)]
    N = np.zeros((4, 4))
    Nx = np.zeros((4, 4))
    Ny = np.zeros((4, 4))
    for q, (xi, eta) in enumerate(pts):
        for a, (ca, cb) in enumerate(corners):
            N[q, a] = 0.25 * (1 + ca * xi) * (1 + cb * eta)
            Nx[q, a] = 0.25 * ca * (1 + cb * eta) * 2.0 / hx
            Ny[q, a] = 0.25 * cb * (1 + ca * xi) * 2.0 / hy
    return N, Nx, Ny


def dense_assemble(problem, grid, mu, state=None, linearization=None):
    """Dense interior operator and load vector by explicit element loops."""
    from bifirom.fem import fem_space  # only for coefficient evaluation points

    nf = problem.n_fields
    nx, ny = grid.nx, grid.ny
    n1 = (nx - 1) * (ny - 1)
    n = nf * n1
    assert n <= MAX_DENSE, "oracle is for small grids only"
    space = fem_space(grid, nf)
    mu = problem.check_mu(mu)
    u_q = None
    if problem.nonlinearity != "linear":
        # interpolate the state to quadrature points with our own loops
        N, _, _ = _q1_tables(grid.hx, grid.hy)
        u_q = np.zeros((nf, nx * ny, 4))
        for j in range(ny):
            for i in range(nx):
                e = j * nx + i
                for f in range(nf):
                    for a, (di, dj) in enumerate([(0, 0), (1, 0), (1, 1), (0, 1)]):
                        ii, jj = i + di, j + dj
                        if 0 < ii < nx and 0 < jj < ny:
                            u_q[f, e] += N[:, a] * state[f * n1 + (jj - 1) * (nx - 1) + ii - 1]
    c = problem.coefficients(mu, space, u_q, linearization or problem.nonlinearity)
    ne = nx * ny
    dx = np.broadcast_to(np.asarray(c.dx, float), (nf, ne, 4))
    dy = np.broadcast_to(np.asarray(c.dy, float), (nf, ne, 4))
    rc = np.broadcast_to(np.asarray(c.react, float), (nf, nf, ne, 4))
    src = np.broadcast_to(np.asarray(c.source, float), (nf, ne, 4))

    N, Nx, Ny = _q1_tables(grid.hx, grid.hy)
    w = grid.hx * grid.hy / 4.0
    A = np.zeros((n, n))
    b = np.zeros(n)
    for j in range(ny):
        for i in range(nx):
            e = j * nx + i
            dofs = []
            for di, dj in [(0, 0), (1, 0), (1, 1), (0, 1)]:
                ii, jj = i + di, j + dj
                dofs.append((jj - 1) * (nx - 1) + ii - 1 if 0 < ii < nx and 0 < jj < ny else -1)
            for f in range(nf):
                for a in range(4):
                    if dofs[a] < 0:
                        continue
                    ra = f * n1 + dofs[a]
                    b[ra] += w * np.sum(src[f, e] * N[:, a])
                    for g in range(nf):
                        for bb in range(4):
                            if dofs[bb] < 0:
                                continue
                            cb = g * n1 + dofs[bb]
                            val = w * np.sum(rc[f, g, e] * N[:, a] * N[:, bb])
                            if f == g:
                                val += w * np.sum(dx[f, e] * Nx[:, a] * Nx[:, bb] + dy[f, e] * Ny[:, a] * Ny[:, bb])
                            A[ra, cb] += val
    return A, b


def galerkin_oracle(problem, hf_grid, mu, Q):
    """Exact Galerkin reduced solution ``Q (Q^T A Q)^{-1} Q^T f`` (linear problems)."""
    assert problem.nonlinearity == "linear"
    A, f = dense_assemble(problem, hf_grid, mu)
    Ar = Q.T @ A @ Q
    fr = Q.T @ f
    return Q @ np.linalg.solve(Ar, fr)


def householder_qr(A, pivoting=False):
    """Householder QR, optionally with classical column pivoting (largest
    remaining column norm, ties to the lowest index).  Returns ``(Q, R, piv)``."""
    A = np.array(A, dtype=float)
    m, n = A.shape
    assert m * n <= MAX_DENSE * 50
    piv = np.arange(n)
    Q = np.eye(m)
    k = min(m, n)
    for j in range(k):
        if pivoting:
            norms = np.array([A[j:, c] @ A[j:, c] for c in range(j, n)])
            p = j + int(np.argmax(norms))
            if p != j:
                A[:, [j, p]] = A[:, [p, j]]
                piv[[j, p]] = piv[[p, j]]
        x = A[j:, j].copy()
        nx = np.sqrt(x @ x)
        if nx == 0.0:
            continue
        v = x
        v[0] += np.copysign(nx, x[0])
        v /= np.sqrt(v @ v)
        A[j:, :] -= 2.0 * np.outer(v, v @ A[j:, :])
        Q[:, j:] -= 2.0 * np.outer(Q[:, j:] @ v, v)
    return Q, np.triu(A), piv


def dense_pivoted_qr(S):
    """Pivot order of column-pivoted Householder QR."""
    return householder_qr(S, pivoting=True)[2]


def qr_least_squares(A, b):
    """Least squares via (unpivoted) Householder QR and back substitution."""
    Q, R, _ = householder_qr(A)
    n = A.shape[1]
    y = Q.T @ b
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        x[i] = (y[i] - R[i, i + 1 : n] @ x[i + 1 :]) / R[i, i]
    return x


def jacobi_singular_values(A, tol=1e-15, sweeps=60):
    """One-sided Jacobi SVD: singular values in descending order."""
    U = np.array(A, dtype=float)
    if U.shape[0] < U.shape[1]:
        U = U.T.copy()
    n = U.shape[1]
    for _ in range(sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = U[:, p] @ U[:, p]
                beta = U[:, q] @ U[:, q]
                gamma = U[:, p] @ U[:, q]
                if alpha == 0 or beta == 0:
                    continue
                off = max(off, abs(gamma) / np.sqrt(alpha * beta))
                if abs(gamma) <= tol * np.sqrt(alpha * beta):
                    continue
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.copysign(1.0, zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                up = U[:, p].copy()
                U[:, p] = c * up - s * U[:, q]
                U[:, q] = s * up + c * U[:, q]
        if off <= tol:
            break
    return np.sort(np.sqrt(np.einsum("ij,ij->j", U, U)))[::-1]
