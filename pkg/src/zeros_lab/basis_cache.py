"""Binary cache of Bergman bases.

One file per (effective weight, p, quadrature) key, named by the SHA-256 of
the key. Layout, all little-endian:

- magic           8 bytes, b"ZLBASIS1"
- key digest      32 bytes
- p, d_p          2 x uint64
- center          complex128
- B̃               d_p x d_p complex128, row-major
- log norms       d_p float64

The Gram matrix is not stored; it is rebuilt from B̃.

"""
import hashlib
import logging
import struct
from pathlib import Path
from typing import Optional

import numpy as np

from bergman.bergman_space import BergmanBasis, build_basis
from bergman.quadrature import Quadrature, adapted_quadrature
from bergman.weights import WeightSequence, effective_weight

from . import _

logger = logging.getLogger("zeros_lab.basis_cache")

MAGIC = b"ZLBASIS1"
_HEADER = struct.Struct("<8s32sQQdd")


class BasisCacheException(Exception):
    """An exception occurred while handling the basis cache."""


class CacheKeyMismatch(BasisCacheException):
    """Cache file does not hold the requested basis."""


def cache_key(weight_key: str, p: int, quadrature_key: str) -> bytes:
    """Return the SHA-256 digest identifying a basis."""
    text = "{}|p={}|{}".format(weight_key, p, quadrature_key)
    return hashlib.sha256(text.encode("utf-8")).digest()


class BasisCache:
    """Store and reload bases in a cache directory."""

    def __init__(self, cache_dir: Optional[str]) -> None:
        self._dir = None if cache_dir is None else Path(cache_dir).expanduser()
        self._hits = 0
        self._misses = 0
        if self._dir is not None and not self._dir.is_dir():
            try:
                self._dir.mkdir(parents=True)
            except OSError:
                logger.error(_("Creation of the directory %s failed"), self._dir)
                raise
            else:
                logger.info(_("Successfully created the directory %s"), self._dir)

    @property
    def enabled(self) -> bool:
        return self._dir is not None

    @property
    def hits(self) -> int:
        return self._hits

    @property
    def misses(self) -> int:
        return self._misses

    def path(self, digest: bytes) -> Path:
        assert self._dir is not None
        return self._dir / (digest.hex() + ".bin")

    def store(self, basis: BergmanBasis) -> Optional[Path]:
        """Write basis to the cache, returning the file path."""
        if self._dir is None:
            return None
        digest = cache_key(basis.weight_total.key, basis.p, basis.quadrature_key)
        header = _HEADER.pack(
            MAGIC, digest, basis.p, basis.d_p, basis.center.real, basis.center.imag
        )
        file = self.path(digest)
        with file.open("wb") as f:
            f.write(header)
            f.write(np.ascontiguousarray(basis.scaled_coeffs, dtype="<c16").tobytes())
            f.write(np.ascontiguousarray(basis.log_norms, dtype="<f8").tobytes())
        logger.debug(_("Basis p=%s stored to %s"), basis.p, file)
        return file

    def load(self, ws: WeightSequence, p: int, q: Quadrature) -> Optional[BergmanBasis]:
        """Return the cached basis, None if absent.

        Raises
        ------
        CacheKeyMismatch
            If the file exists but holds another basis or is truncated.
        """
        if self._dir is None:
            return None
        weight = effective_weight(ws, p)
        q = adapted_quadrature(q, weight.total_mass)
        digest = cache_key(weight.key, p, q.key)
        file = self.path(digest)
        if not file.is_file():
            return None
        raw = file.read_bytes()
        if len(raw) < _HEADER.size:
            raise CacheKeyMismatch(_("Truncated cache file {}").format(file))
        magic, key, p_file, d_p, c_re, c_im = _HEADER.unpack_from(raw)
        if magic != MAGIC or key != digest or p_file != p:
            logger.warning(_("Cache file %s does not match its key"), file)
            raise CacheKeyMismatch(_("Cache key mismatch in {}").format(file))
        offset = _HEADER.size
        size = d_p * d_p * 16
        if len(raw) != offset + size + d_p * 8:
            raise CacheKeyMismatch(_("Truncated cache file {}").format(file))
        coeffs = np.frombuffer(raw, dtype="<c16", count=d_p * d_p, offset=offset)
        log_norms = np.frombuffer(raw, dtype="<f8", count=d_p, offset=offset + size)
        logger.debug(_("Basis p=%s loaded from %s"), p, file)
        return BergmanBasis(
            p,
            weight,
            log_norms,
            coeffs.reshape(d_p, d_p),
            range(d_p, p + 1),
            center=complex(c_re, c_im),
            quadrature_key=q.key,
        )

    def get_or_build(self, ws: WeightSequence, p: int, q: Quadrature) -> BergmanBasis:
        """Return the basis from cache, building and storing it when missing."""
        try:
            basis = self.load(ws, p, q)
        except CacheKeyMismatch:
            basis = None
        if basis is not None:
            self._hits += 1
            return basis
        self._misses += 1
        basis = build_basis(ws, p, q)
        self.store(basis)
        return basis
