import struct

import numpy as np
import pytest

from bifirom.errors import ArtifactFormatError, ArtifactVersionError, ContractError
from bifirom.offline import OfflineConfig, build_artifact
from bifirom.online import online_solve
from bifirom.store import MAGIC, dumps, load, loads, save


@pytest.fixture(scope="module")
def art():
    cfg = OfflineConfig.for_problem("nl-elliptic", 16, 8, n_p=30, N_rb=5, n_L=6, n_f=2)
    return build_artifact(cfg)


def _section_offset(data, name):
    key = struct.pack("<I", len(name)) + name.encode()
    pos = data.index(key)
    rank = data[pos + len(key) + 1]
    return pos + len(key) + 2 + 8 * rank


def test_roundtrip_byte_identical(art, tmp_path):
    path = tmp_path / "a.bfrm"
    save(art, path)
    again = load(path)
    assert dumps(again) == path.read_bytes()
    for name in ("Q", "L_rb_basis", "G_L", "Llow_gamma", "Uhigh_gamma_u"):
        assert np.array_equal(getattr(again, name), getattr(art, name))
    assert again.hf_grid == art.hf_grid and again.lf_grid == art.lf_grid
    assert np.array_equal(again.gamma_L.indices, art.gamma_L.indices)


def test_loaded_artifact_gives_identical_online_answer(art):
    mu = [0.3, 0.6, 0.9]
    a = online_solve(art, mu).u_r
    b = online_solve(loads(dumps(art)), mu).u_r
    assert np.array_equal(a, b)


def test_header_layout(art):
    data = dumps(art)
    assert data[:4] == MAGIC
    version, mlen = struct.unpack("<II", data[4:12])
    assert version == 1
    import json

    meta = json.loads(data[12 : 12 + mlen])
    assert meta["problem"] == "nl-elliptic"
    assert meta["counts"] == {"N_rb": 5, "n_L": 6, "n_f": 2, "N_h": 225}
    assert "Q" in meta["crc32"]


def test_flipped_payload_byte_rejected(art):
    data = bytearray(dumps(art))
    off = _section_offset(bytes(data), "Q")
    data[off + 17] ^= 0x01
    with pytest.raises(ArtifactFormatError, match="checksum"):
        loads(bytes(data))


def test_truncation_reported(art):
    data = dumps(art)
    with pytest.raises(ArtifactFormatError, match="truncated"):
        loads(data[:-5])
    with pytest.raises(ArtifactFormatError):
        loads(data[:10])


def test_bad_magic_and_version(art):
    data = bytearray(dumps(art))
    with pytest.raises(ArtifactFormatError, match="magic"):
        loads(b"XXXX" + bytes(data[4:]))
    data[4:8] = struct.pack("<I", 2)
    with pytest.raises(ArtifactVersionError):
        loads(bytes(data))


def test_timings_optional(art):
    a = loads(dumps(art, include_timings=False))
    assert "timings" not in a.metadata
    assert dumps(art, include_timings=False) == dumps(a)


def test_incomplete_artifact_refused(art):
    import copy

    broken = copy.copy(art)
    broken.Q = None
    with pytest.raises(ContractError):
        dumps(broken)
