"""Binary artifact container (``BFRM`` version 1).

Layout, all integers little-endian::

    b"BFRM" | u32 version | u32 metadata length | metadata (UTF-8 JSON)
    then per section:
    u32 name length | name (UTF-8) | u8 dtype (0=f64, 1=u64) | u8 rank |
    u64 dims[rank] | row-major payload

Metadata keys are sorted and floats are written with ``repr`` so a
save -> load -> save cycle is byte-identical.  Each section's CRC32 is stored
in the metadata and checked on load, before the artifact invariants.
"""
import json
import struct
import zlib

import numpy as np

from . import __version__
from .errors import ArtifactFormatError, ArtifactVersionError, ContractError
from .fem import StructuredGrid
from .nonlinear import IterationConfig
from .offline import RomArtifact
from .snapshots import ParameterSet, SparsityPattern

__all__ = ["MAGIC", "FORMAT_VERSION", "save", "load", "dumps", "loads"]

MAGIC = b"BFRM"
FORMAT_VERSION = 1
_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<u8")}
_TAGS = {"f": 0, "u": 1}

_F64_SECTIONS = (
    "Q",
    "L_rb_basis",
    "f_rb_basis",
    "G_L",
    "G_F",
    "Llow_gamma",
    "Flow_gamma",
    "Ulow_gamma_u",
    "Uhigh_gamma_u",
)
_GAMMAS = ("gamma_u", "gamma_L", "gamma_f")


def _grid_dict(g):
    return {"nx": g.nx, "ny": g.ny, "bounds": list(g.bounds)}


def _grid_from(d):
    x0, x1, y0, y1 = d["bounds"]
    return StructuredGrid(d["nx"], d["ny"], x0, x1, y0, y1)


def _sections(art):
    out = [(name, np.asarray(getattr(art, name), dtype="<f8")) for name in _F64_SECTIONS]
    for name in _GAMMAS:
        ps = getattr(art, name)
        out.append((name, np.asarray(ps.points, dtype="<f8")))
        if ps.indices is not None:
            out.append((name + ".indices", np.asarray(ps.indices, dtype="<u8")))
    out.append(("lf_pattern.row_ptr", np.asarray(art.lf_pattern.indptr, dtype="<u8")))
    out.append(("lf_pattern.col_idx", np.asarray(art.lf_pattern.indices, dtype="<u8")))
    return out


def _encode_section(name, arr):
    arr = np.ascontiguousarray(arr)
    nb = name.encode("utf-8")
    head = struct.pack("<I", len(nb)) + nb + struct.pack("<BB", _TAGS[arr.dtype.kind], arr.ndim)
    head += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return head + arr.tobytes(order="C")


def dumps(artifact, include_timings=True):
    """Serialize ``artifact`` to bytes."""
    art = artifact
    for name in _F64_SECTIONS:
        if getattr(art, name, None) is None:
            raise ContractError(f"artifact is incomplete: missing {name}")
    build = dict(art.metadata)
    if not include_timings:
        build.pop("timings", None)
    sections = _sections(art)
    meta = {
        "format": {"tool_version": __version__},
        "problem": art.problem_id,
        "hf_grid": _grid_dict(art.hf_grid),
        "lf_grid": _grid_dict(art.lf_grid),
        "lf_iteration": art.lf_iteration.as_dict(),
        "counts": {"N_rb": art.N_rb, "n_L": art.n_L, "n_f": art.n_f, "N_h": art.N_h},
        "lf_pattern_shape": list(art.lf_pattern.shape),
        "gamma_seed": art.gamma_u.seed,
        "build": build,
        "crc32": {name: zlib.crc32(np.ascontiguousarray(a).tobytes()) for name, a in sections},
    }
    mb = json.dumps(meta, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(mb)), mb]
    parts += [_encode_section(name, a) for name, a in sections]
    return b"".join(parts)


def save(artifact, path, include_timings=True):
    data = dumps(artifact, include_timings)
    with open(path, "wb") as fh:
        fh.write(data)


class _Reader:
    def __init__(self, data):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.data):
            raise ArtifactFormatError(
                f"file truncated in {what}: need {n} bytes at offset {self.pos}, "
                f"{len(self.data) - self.pos} left"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    @property
    def done(self):
        return self.pos == len(self.data)


def loads(data):
    """Parse a container, check checksums and re-validate the artifact."""
    r = _Reader(data)
    if bytes(r.take(4, "magic")) != MAGIC:
        raise ArtifactFormatError("not a BFRM artifact (bad magic bytes)")
    (version,) = r.unpack("<I", "version")
    if version != FORMAT_VERSION:
        raise ArtifactVersionError(f"artifact format version {version}; this reader supports {FORMAT_VERSION}")
    (mlen,) = r.unpack("<I", "metadata length")
    try:
        meta = json.loads(bytes(r.take(mlen, "metadata")).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArtifactFormatError(f"metadata block is not valid JSON: {exc}") from exc

    arrays = {}
    while not r.done:
        (nlen,) = r.unpack("<I", "section header")
        try:
            name = bytes(r.take(nlen, "section name")).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ArtifactFormatError(f"section name at offset {r.pos} is not UTF-8") from exc
        tag, rank = r.unpack("<BB", f"section {name!r} header")
        if tag not in _DTYPES:
            raise ArtifactFormatError(f"section {name!r} has unknown dtype tag {tag}")
        dims = r.unpack(f"<{rank}Q", f"section {name!r} dims")
        dt = _DTYPES[tag]
        nbytes = int(np.prod(dims, dtype=np.int64)) * dt.itemsize
        payload = r.take(nbytes, f"section {name!r} payload")
        if name in arrays:
            raise ArtifactFormatError(f"duplicate section {name!r}")
        expected = meta.get("crc32", {}).get(name)
        if expected is not None and zlib.crc32(payload) != expected:
            raise ArtifactFormatError(f"checksum mismatch in section {name!r}")
        arrays[name] = np.frombuffer(payload, dtype=dt).reshape(dims).astype(dt.newbyteorder("="))

    required = (*_F64_SECTIONS, *_GAMMAS, "lf_pattern.row_ptr", "lf_pattern.col_idx")
    missing = [n for n in required if n not in arrays]
    if missing:
        raise ArtifactFormatError(f"missing sections: {missing}")

    seed = meta.get("gamma_seed")
    gammas = {}
    for name in _GAMMAS:
        idx = arrays.get(name + ".indices")
        gammas[name] = ParameterSet(
            arrays[name], name, seed, None if idx is None else idx.astype(np.int64)
        )
    indptr = arrays["lf_pattern.row_ptr"].astype(np.int32)
    indices = arrays["lf_pattern.col_idx"].astype(np.int32)
    it = meta["lf_iteration"]
    art = RomArtifact(
        problem_id=meta["problem"],
        hf_grid=_grid_from(meta["hf_grid"]),
        lf_grid=_grid_from(meta["lf_grid"]),
        lf_iteration=IterationConfig(it["method"], it["tol_rel"], it["max_iter"]),
        **{name: arrays[name] for name in _F64_SECTIONS},
        **gammas,
        lf_pattern=SparsityPattern(indptr, indices, tuple(meta["lf_pattern_shape"])),
        metadata=meta["build"],
    )
    errs = art.validation_errors()
    if errs:
        raise ArtifactFormatError("artifact failed invariant checks on load: " + "; ".join(errs))
    return art


def load(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
