"""Row-aligned population and edge tables.

Node rows are kept in increasing id order: births append, deaths compact.
Edges refer to node *rows*; compaction remaps them. Edge keys are built from
node *ids* so that pair uniqueness survives compaction.
"""

from __future__ import annotations

import numpy as np

# Node stage codes.
SUSCEPTIBLE = 0
EARLY = 1
CHRONIC = 2
LATE = 3

_ID_SHIFT = np.int64(1 << 32)


def pair_key(id_a: np.ndarray, id_b: np.ndarray) -> np.ndarray:
    lo = np.minimum(id_a, id_b).astype(np.int64)
    hi = np.maximum(id_a, id_b).astype(np.int64)
    return lo * _ID_SHIFT + hi


class Population:
    """Column store of node values. Every column has one entry per live node."""

    # name -> (dtype, trailing shape, fill value for new rows)
    COLUMNS = {
        "ids": (np.int64, (), 0),
        "group": (np.int64, (), 0),
        "male": (np.bool_, (), False),
        "offset": (np.float64, (2,), 0.0),
        "offset_prev": (np.float64, (2,), 0.0),
        "amplitude": (np.float64, (), 0.0),
        "spread": (np.float64, (), 1.0),
        "adopter": (np.bool_, (), False),
        "gud": (np.bool_, (), False),
        "resistance": (np.float64, (), 0.0),
        "born_at": (np.int64, (), 0),
        "stage": (np.int8, (), SUSCEPTIBLE),
        "infected_at": (np.int64, (), -1),
        "early_end": (np.int64, (), -1),
        "chronic_end": (np.int64, (), -1),
        "beta_early": (np.float64, (), 0.0),
        "beta_chronic": (np.float64, (), 0.0),
        "strain": (np.int64, (), -1),
        "strain_gen": (np.int64, (), 0),
        "treated": (np.bool_, (), False),
        "ever_infected": (np.bool_, (), False),
        "infections": (np.int64, (), 0),
        "cured": (np.bool_, (), False),
    }

    def __init__(self):
        for name, (dtype, shape, _) in self.COLUMNS.items():
            setattr(self, name, np.zeros((0,) + shape, dtype=dtype))
        self.next_id = 0

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def infected(self) -> np.ndarray:
        return self.stage != SUSCEPTIBLE

    def append(self, n: int, **values) -> np.ndarray:
        """Append ``n`` rows with defaults overridden by ``values``; returns the new row indices."""
        start = len(self)
        for name, (dtype, shape, fill) in self.COLUMNS.items():
            block = np.full((n,) + shape, fill, dtype=dtype)
            if name == "ids":
                block = np.arange(self.next_id, self.next_id + n, dtype=np.int64)
            elif name in values:
                block[...] = values[name]
            setattr(self, name, np.concatenate([getattr(self, name), block]))
        unknown = set(values) - set(self.COLUMNS)
        if unknown:
            raise KeyError(f"unknown node columns {sorted(unknown)}")
        self.next_id += n
        return np.arange(start, start + n)

    def keep(self, mask: np.ndarray) -> np.ndarray:
        """Drop rows where ``mask`` is False; returns old-row -> new-row map (-1 for dropped)."""
        remap = np.full(len(self), -1, dtype=np.int64)
        remap[mask] = np.arange(int(mask.sum()))
        for name in self.COLUMNS:
            setattr(self, name, getattr(self, name)[mask])
        return remap

    def to_dict(self) -> dict:
        out = {name: getattr(self, name).tolist() for name in self.COLUMNS}
        out["next_id"] = self.next_id
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Population":
        pop = cls()
        for name, (dtype, shape, _) in cls.COLUMNS.items():
            setattr(pop, name, np.asarray(data[name], dtype=dtype).reshape((-1,) + shape))
        pop.next_id = int(data["next_id"])
        return pop


class Edges:
    """Undirected edge list with per-edge values. ``u < v`` by row (hence by id)."""

    COLUMNS = {
        "u": (np.int64, 0),
        "v": (np.int64, 0),
        "key": (np.int64, 0),
        "formed_at": (np.int64, 0),
        "protocol": (np.bool_, False),     # both partners run the pair strategy on this edge
        "tested": (np.bool_, False),
        "discordant": (np.bool_, False),
        "safer": (np.bool_, False),        # safer-sex multiplier currently applies
    }

    def __init__(self):
        for name, (dtype, _) in self.COLUMNS.items():
            setattr(self, name, np.zeros(0, dtype=dtype))

    def __len__(self) -> int:
        return len(self.u)

    def add(self, u: np.ndarray, v: np.ndarray, keys: np.ndarray, t: int, **values) -> None:
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        n = len(lo)
        block = {"u": lo, "v": hi, "key": keys, "formed_at": np.full(n, t)}
        for name, (dtype, fill) in self.COLUMNS.items():
            col = block.get(name, values.get(name, np.full(n, fill, dtype=dtype)))
            setattr(self, name, np.concatenate([getattr(self, name), np.asarray(col, dtype=dtype)]))

    def keep(self, mask: np.ndarray) -> None:
        for name in self.COLUMNS:
            setattr(self, name, getattr(self, name)[mask])

    def remap_nodes(self, remap: np.ndarray) -> int:
        """Apply a node row remap; edges touching dropped rows are removed. Returns edges removed."""
        if len(self) == 0:
            return 0
        nu, nv = remap[self.u], remap[self.v]
        alive = (nu >= 0) & (nv >= 0)
        self.u, self.v = nu, nv
        self.keep(alive)
        return int((~alive).sum())

    def degree(self, n_nodes: int) -> np.ndarray:
        return (np.bincount(self.u, minlength=n_nodes) + np.bincount(self.v, minlength=n_nodes)).astype(np.int64)

    def adjacency(self, n_nodes: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """CSR neighbor lists: (indptr, neighbor rows, edge index) sorted by neighbor row."""
        src = np.concatenate([self.u, self.v])
        dst = np.concatenate([self.v, self.u])
        eidx = np.concatenate([np.arange(len(self)), np.arange(len(self))])
        order = np.lexsort((dst, src))
        counts = np.bincount(src, minlength=n_nodes)
        indptr = np.concatenate([[0], np.cumsum(counts)])
        return indptr, dst[order], eidx[order]

    def to_dict(self) -> dict:
        return {name: getattr(self, name).tolist() for name in self.COLUMNS}

    @classmethod
    def from_dict(cls, data: dict) -> "Edges":
        e = cls()
        for name, (dtype, _) in cls.COLUMNS.items():
            setattr(e, name, np.asarray(data[name], dtype=dtype))
        return e
