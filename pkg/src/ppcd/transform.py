"""RBT, MRBT and the two halves of ARBT.

Client side: :func:`rbt`, :func:`mrbt`, :func:`arbt_client_release` and
:func:`refresh_parameters`.  Everything that knows an angle lives in
:class:`ClientSecrets`; a :class:`TransformedDataset` only carries rotated
values and block layout, so it can be handed to the miner as is.

Server side: :func:`server_unify` rotates block ``i`` by a released angle
into the frame of block ``j``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .dataset import Dataset, PartitionError, partition_widths
from .ledger import ReleaseLedger
from .rotation import DimensionError, rotate_blocks, seed_to_angle, unification_angle

MANIFEST = "manifest.txt"


class TransformError(ValueError):
    pass


def derive_seeds(master_seed: int, m: int) -> list[int]:
    """``m`` distinct 64-bit seeds drawn from a master seed."""
    rng = np.random.default_rng(master_seed)
    seeds: list[int] = []
    while len(seeds) < m:
        for s in rng.integers(0, 2**64, size=m - len(seeds), dtype=np.uint64, endpoint=False):
            if int(s) not in seeds:
                seeds.append(int(s))
    return seeds


@dataclass(frozen=True)
class ClientSecrets:
    seeds: tuple
    angles: tuple

    def __post_init__(self):
        if len(self.seeds) != len(self.angles):
            raise TransformError("one angle per seed is required")

    @property
    def m(self) -> int:
        return len(self.seeds)

    @classmethod
    def from_seeds(cls, seeds) -> "ClientSecrets":
        seeds = tuple(int(s) for s in seeds)
        return cls(seeds, tuple(seed_to_angle(s) for s in seeds))

    def angle(self, i: int) -> float:
        """Angle of subset ``i`` (1-based)."""
        if not 1 <= i <= self.m:
            raise TransformError(f"subset index {i} out of range 1..{self.m}")
        return self.angles[i - 1]

    def save(self, path) -> None:
        Path(path).write_text(json.dumps({"m": self.m, "seeds": list(self.seeds), "angles": list(self.angles)}, indent=1))

    @classmethod
    def load(cls, path) -> "ClientSecrets":
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise TransformError(f"cannot read secrets {path}: {exc.strerror or exc}") from exc
        # angles are re-derived so a hand-edited file cannot drift from its seeds
        return cls.from_seeds(raw["seeds"])


@dataclass(frozen=True)
class TransformedDataset:
    """Rotated records, stored contiguously, with block layout only."""

    values: np.ndarray
    widths: tuple
    subset_index: tuple

    def __post_init__(self):
        if sum(self.widths) != self.values.shape[1]:
            raise TransformError("block widths do not cover the transformed matrix")
        if len(self.subset_index) != len(self.widths):
            raise TransformError("one subset index per block is required")

    @property
    def m(self) -> int:
        return len(self.widths)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @property
    def blocks(self) -> list[np.ndarray]:
        bounds = np.cumsum((0,) + tuple(self.widths))
        return [self.values[:, lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:])]

    def block(self, i: int) -> np.ndarray:
        """Block of subset ``i`` (1-based)."""
        try:
            pos = self.subset_index.index(i)
        except ValueError:
            raise TransformError(f"no block for subset {i}; have {list(self.subset_index)}") from None
        return self.blocks[pos]

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for idx, blk in zip(self.subset_index, self.blocks):
            np.savetxt(directory / f"block_{idx:03d}.csv", blk.T, delimiter=",", fmt="%.17g")
        manifest = [
            f"m {self.m}",
            f"a {self.dim}",
            "widths " + " ".join(str(w) for w in self.widths),
            "subsets " + " ".join(str(s) for s in self.subset_index),
        ]
        (directory / MANIFEST).write_text("\n".join(manifest) + "\n")

    @classmethod
    def load(cls, directory) -> "TransformedDataset":
        directory = Path(directory)
        try:
            fields = dict(ln.split(maxsplit=1) for ln in (directory / MANIFEST).read_text().splitlines() if ln.strip())
        except OSError as exc:
            raise TransformError(f"cannot read manifest in {directory}: {exc.strerror or exc}") from exc
        a = int(fields["a"])
        widths = tuple(int(x) for x in fields["widths"].split())
        subsets = tuple(int(x) for x in fields["subsets"].split())
        blocks = []
        for idx, w in zip(subsets, widths):
            blk = np.loadtxt(directory / f"block_{idx:03d}.csv", delimiter=",", ndmin=2).T
            if blk.shape != (a, w):
                raise TransformError(f"block {idx} has shape {blk.shape}, manifest says {(a, w)}")
            blocks.append(blk)
        return cls(np.hstack(blocks), widths, subsets)


@dataclass(frozen=True)
class UnifiedPair:
    merged: np.ndarray
    source_subsets: tuple
    widths: tuple

    @property
    def left(self) -> np.ndarray:
        return self.merged[:, : self.widths[0]]

    @property
    def right(self) -> np.ndarray:
        return self.merged[:, self.widths[0]:]


@dataclass(frozen=True)
class ReleaseDecision:
    granted: bool
    theta: Optional[float] = None
    reason: str = ""


def _require_even(d: Dataset):
    if d.a % 2:
        raise DimensionError(f"attribute count {d.a} is odd; pad the dataset first (pad_to_even)")


def transform_values(values: np.ndarray, angles, widths) -> np.ndarray:
    """The timed kernel: rotate each block by its angle."""
    return rotate_blocks(values, angles, widths)


def rbt(d: Dataset, seed: int) -> TransformedDataset:
    _require_even(d)
    y = transform_values(d.values, [seed_to_angle(seed)], [d.n])
    return TransformedDataset(y, (d.n,), (1,))


def mrbt(d: Dataset, m: int, seeds) -> tuple[TransformedDataset, ClientSecrets]:
    _require_even(d)
    seeds = list(seeds)
    if len(seeds) != m:
        raise TransformError(f"mrbt needs {m} seeds, got {len(seeds)}")
    if m < 1:
        raise PartitionError(f"number of subsets must be positive, got {m}")
    c = d.n // m
    if c <= d.a:
        raise PartitionError(
            f"each subset needs more records than attributes (c > a): c = floor({d.n}/{m}) = {c}, a = {d.a}"
        )
    secrets = ClientSecrets.from_seeds(seeds)
    widths = partition_widths(d.n, m)
    y = transform_values(d.values, secrets.angles, widths)
    return TransformedDataset(y, tuple(widths), tuple(range(1, m + 1))), secrets


def inner_product_blocks(ya: TransformedDataset, yb: TransformedDataset) -> list[list[np.ndarray]]:
    """``out[i][j] = Y_Ai^T Y_Bj`` for all block pairs (0-based positions)."""
    if ya.dim != yb.dim or ya.widths != yb.widths:
        raise TransformError(
            f"shape mismatch: dims {ya.dim}/{yb.dim}, widths {ya.widths}/{yb.widths}"
        )
    return [[p.T @ q for q in yb.blocks] for p in ya.blocks]


def arbt_client_release(secrets: ClientSecrets, i: int, j: int, ledger: ReleaseLedger) -> ReleaseDecision:
    """Release ``theta_ij`` if the ledger allows it, recording the release.

    A refusal returns ``granted=False`` with the policy reason and reveals
    nothing about the angles.
    """
    if ledger.m != secrets.m:
        raise TransformError(f"ledger covers {ledger.m} subsets, secrets cover {secrets.m}")
    with ledger.lock:
        ok, reason = ledger.can_release(i, j)
        if not ok:
            return ReleaseDecision(False, None, reason)
        theta = unification_angle(secrets.angle(i), secrets.angle(j))
        ledger.record_release(i, j, theta)
    return ReleaseDecision(True, theta, "")


def server_unify(y: TransformedDataset, i: int, j: int, theta_ij: float) -> UnifiedPair:
    """Rotate block ``i`` by ``theta_ij`` and place it before block ``j``."""
    if i == j:
        raise TransformError("cannot unify a subset with itself")
    yi, yj = y.block(i), y.block(j)
    if yi.shape[0] != yj.shape[0]:
        raise DimensionError(f"blocks {i} and {j} have different dimensions")
    yi_star = rotate_blocks(yi, [theta_ij], [yi.shape[1]])
    return UnifiedPair(np.hstack([yi_star, yj]), (i, j), (yi.shape[1], yj.shape[1]))


def refresh_parameters(secrets: ClientSecrets, d: Dataset, master_seed: int):
    """Re-key: new seeds, new transformed data, empty ledger."""
    seeds = derive_seeds(master_seed, secrets.m)
    y, new_secrets = mrbt(d, secrets.m, seeds)
    return y, new_secrets, ReleaseLedger(secrets.m)
