"""On-disk feature cache, one binary file per (dataset, sample, extractor, config).

Entry layout, little-endian::

    magic    4s   b"PADF"
    version  u16
    id_len   u16  length of extractor id
    ext_id   id_len bytes, UTF-8
    cfg_hash 32s  raw SHA-256 of the extractor config
    dim      u32
    payload  dim x f32
    crc32    u32  over every preceding byte

Entries are write-once and written via temp-file + rename, so a reader sees
either nothing or a complete entry.
"""

from __future__ import annotations

import hashlib
import os
import struct
import tempfile
import zlib
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import ChecksumError

MAGIC = b"PADF"
VERSION = 1
CACHE_ENV = "PADBENCH_CACHE_DIR"
_HEAD = struct.Struct("<4sHH")


def default_cache_dir() -> Path:
    return Path(os.environ.get(CACHE_ENV, Path.home() / ".cache" / "padbench"))


def encode_entry(values: np.ndarray, extractor_id: str, cfg_hash: str) -> bytes:
    ext = extractor_id.encode()
    payload = np.asarray(values, dtype="<f4").tobytes()
    body = (
        _HEAD.pack(MAGIC, VERSION, len(ext))
        + ext
        + bytes.fromhex(cfg_hash)
        + struct.pack("<I", len(values))
        + payload
    )
    return body + struct.pack("<I", zlib.crc32(body))


def decode_entry(blob: bytes, where: str = "<entry>") -> tuple[np.ndarray, str, str]:
    if len(blob) < _HEAD.size + 4:
        raise ChecksumError(f"{where}: truncated cache entry")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise ChecksumError(f"{where}: checksum mismatch")
    magic, version, id_len = _HEAD.unpack_from(body)
    if magic != MAGIC or version != VERSION:
        raise ChecksumError(f"{where}: bad magic/version {magic!r}/{version}")
    pos = _HEAD.size
    ext = body[pos:pos + id_len].decode()
    pos += id_len
    cfg_hash = body[pos:pos + 32].hex()
    pos += 32
    (dim,) = struct.unpack_from("<I", body, pos)
    pos += 4
    if len(body) - pos != 4 * dim:
        raise ChecksumError(f"{where}: payload length does not match dim {dim}")
    return np.frombuffer(body, dtype="<f4", count=dim, offset=pos).copy(), ext, cfg_hash


class FeatureCache:
    def __init__(self, root=None):
        self.root = Path(root) if root is not None else default_cache_dir()

    def path_for(self, dataset_id: str, sample_id: str, extractor_id: str, cfg_hash: str) -> Path:
        key = "\0".join((dataset_id, sample_id, extractor_id, cfg_hash)).encode()
        digest = hashlib.sha256(key).hexdigest()
        return self.root / extractor_id / cfg_hash[:16] / digest[:2] / f"{digest}.feat"

    def get(self, dataset_id, sample_id, extractor_id, cfg_hash) -> Optional[np.ndarray]:
        """Cached vector as float32, or ``None`` on a miss."""
        path = self.path_for(dataset_id, sample_id, extractor_id, cfg_hash)
        try:
            blob = path.read_bytes()
        except FileNotFoundError:
            return None
        values, ext, stored_hash = decode_entry(blob, str(path))
        if ext != extractor_id or stored_hash != cfg_hash:
            raise ChecksumError(f"{path}: entry header does not match its key")
        return values

    def put(self, dataset_id, sample_id, extractor_id, cfg_hash, values) -> Path:
        """Store a vector unless the key already exists (write-once)."""
        path = self.path_for(dataset_id, sample_id, extractor_id, cfg_hash)
        if path.exists():
            return path
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(encode_entry(values, extractor_id, cfg_hash))
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return path
