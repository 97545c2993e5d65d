"""Hot assembly kernels.

Each kernel exists twice: a numba loop and a vectorized numpy version.  The
module-level names (``assemble_values``, ``assemble_load``) point at the numba
variant unless ``BIFIROM_DISABLE_NUMBA=1`` is set or numba is missing.

Array conventions (``nf`` fields, ``ne`` elements, ``nq`` quadrature points):

- ``dx, dy``: ``(nf, ne, nq)`` diffusion coefficients per field
- ``react``: ``(nf, nf, ne, nq)`` reaction/coupling coefficients
- ``bx, by, bm``: ``(nq, 4, 4)`` weighted basis products
- ``scatter``: ``(ne, 4*nf, 4*nf)`` CSR slot per local entry, ``-1`` if eliminated
"""
import numpy as np

from ._accel import USE_NUMBA, njit

__all__ = [
    "assemble_values",
    "assemble_load",
    "assemble_values_numpy",
    "assemble_values_numba",
    "assemble_load_numpy",
    "assemble_load_numba",
    "USE_NUMBA",
]


def assemble_values_numpy(dx, dy, react, bx, by, bm, scatter, nnz):
    nf, ne = dx.shape[0], dx.shape[1]
    local = np.zeros((ne, nf, 4, nf, 4))
    for f in range(nf):
        local[:, f, :, f, :] += np.einsum("eq,qab->eab", dx[f], bx)
        local[:, f, :, f, :] += np.einsum("eq,qab->eab", dy[f], by)
        for g in range(nf):
            local[:, f, :, g, :] += np.einsum("eq,qab->eab", react[f, g], bm)
    local = local.reshape(ne, 4 * nf, 4 * nf)
    mask = scatter >= 0
    return np.bincount(scatter[mask], weights=local[mask], minlength=nnz)


@njit(cache=True, nogil=True)
def assemble_values_numba(dx, dy, react, bx, by, bm, scatter, nnz):
    values = np.zeros(nnz)
    nf = dx.shape[0]
    ne = dx.shape[1]
    nq = dx.shape[2]
    for e in range(ne):
        for f in range(nf):
            for g in range(nf):
                for a in range(4):
                    for b in range(4):
                        slot = scatter[e, 4 * f + a, 4 * g + b]
                        if slot < 0:
                            continue
                        s = 0.0
                        for q in range(nq):
                            if f == g:
                                s += dx[f, e, q] * bx[q, a, b] + dy[f, e, q] * by[q, a, b]
                            s += react[f, g, e, q] * bm[q, a, b]
                        values[slot] += s
    return values


def assemble_load_numpy(source, nw, dofmap, ndof):
    nf, ne = source.shape[0], source.shape[1]
    local = np.einsum("feq,qa->efa", source, nw).reshape(ne, 4 * nf)
    mask = dofmap >= 0
    return np.bincount(dofmap[mask], weights=local[mask], minlength=ndof)


@njit(cache=True, nogil=True)
def assemble_load_numba(source, nw, dofmap, ndof):
    out = np.zeros(ndof)
    nf = source.shape[0]
    ne = source.shape[1]
    nq = source.shape[2]
    for e in range(ne):
        for f in range(nf):
            for a in range(4):
                dof = dofmap[e, 4 * f + a]
                if dof < 0:
                    continue
                s = 0.0
                for q in range(nq):
                    s += source[f, e, q] * nw[q, a]
                out[dof] += s
    return out


if USE_NUMBA:
    assemble_values = assemble_values_numba
    assemble_load = assemble_load_numba
else:
    assemble_values = assemble_values_numpy
    assemble_load = assemble_load_numpy
