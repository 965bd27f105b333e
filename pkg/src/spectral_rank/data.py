"""Multiway comparison datasets: storage, ingestion, breaking and diagnostics.

A dataset is a list of selection events ``(A_l, c_l)``: a choice set ``A_l`` of
at least two distinct items and the single item ``c_l`` chosen from it.  The
events are stored in flat CSR-like arrays so that the estimators downstream
can be fully vectorised.
"""

from __future__ import annotations

import io
import math
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from typing import IO

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import ParseError, ValidationError

__all__ = [
    "Comparison",
    "FullRanking",
    "ComparisonDataset",
    "GraphDiagnostics",
    "parse_choice_csv",
    "break_full_ranking",
    "degree_stats",
    "check_rankability",
]


@dataclass(frozen=True)
class Comparison:
    """One selection event: ``winner`` was chosen out of ``choice_set``."""

    choice_set: tuple[int, ...]
    winner: int

    def __post_init__(self):
        items = tuple(int(i) for i in self.choice_set)
        object.__setattr__(self, "choice_set", items)
        object.__setattr__(self, "winner", int(self.winner))
        if len(items) < 2:
            raise ValidationError(f"choice set {items} has fewer than two items")
        if len(set(items)) != len(items):
            raise ValidationError(f"choice set {items} contains duplicates")
        if min(items) < 0:
            raise ValidationError(f"choice set {items} contains a negative index")
        if self.winner not in items:
            raise ValidationError(f"winner {self.winner} not in {set(items)}")


@dataclass(frozen=True)
class FullRanking:
    """A complete ordering of a choice set, best item first."""

    ranked_items: tuple[int, ...]

    def __post_init__(self):
        items = tuple(int(i) for i in self.ranked_items)
        object.__setattr__(self, "ranked_items", items)
        if len(items) < 2:
            raise ValidationError("a full ranking needs at least two items")
        if len(set(items)) != len(items):
            raise ValidationError(f"ranking {items} contains duplicates")

    def __len__(self) -> int:
        return len(self.ranked_items)


def break_full_ranking(r: FullRanking | Sequence[int]) -> list[Comparison]:
    """Multi-level breaking of a full ranking into ``B - 1`` nested selections.

    ``i_1 > i_2 > ... > i_B`` becomes ``(i_1, {i_1..i_B}), (i_2, {i_2..i_B}),
    ..., (i_{B-1}, {i_{B-1}, i_B})``.
    """
    if not isinstance(r, FullRanking):
        r = FullRanking(tuple(r))
    items = r.ranked_items
    return [Comparison(items[t:], items[t]) for t in range(len(items) - 1)]


class ComparisonDataset:
    """Immutable collection of comparisons over ``n_items`` items.

    Attributes:
        n_items: Number of items; valid indices are ``0..n_items-1``.
        members: Concatenated choice sets (int64).
        offsets: ``members[offsets[l]:offsets[l+1]]`` is ``A_l``.
        winners: ``c_l`` for every comparison.
        groups: Group id per comparison. Comparisons broken out of one full
            ranking share a group; otherwise each comparison is its own group.
        labels: Optional item names, ``labels[i]`` names item ``i``.
    """

    __slots__ = ("n_items", "members", "offsets", "winners", "groups", "labels",
                 "_cache")

    def __init__(self, n_items, members, offsets, winners, groups=None,
                 labels=None, validate=True):
        members = np.ascontiguousarray(members, dtype=np.int64)
        offsets = np.ascontiguousarray(offsets, dtype=np.int64)
        winners = np.ascontiguousarray(winners, dtype=np.int64)
        n_cmp = winners.shape[0]
        if groups is None:
            groups = np.arange(n_cmp, dtype=np.int64)
        else:
            groups = _dense_codes(np.asarray(groups))
        if labels is not None:
            labels = tuple(str(s) for s in labels)
        self.n_items = int(n_items)
        self.members = members
        self.offsets = offsets
        self.winners = winners
        self.groups = groups
        self.labels = labels
        self._cache = {}
        if validate:
            self._validate()
        for arr in (members, offsets, winners, groups):
            arr.setflags(write=False)

    def _validate(self):
        n_cmp = self.winners.shape[0]
        if self.n_items < 1:
            raise ValidationError("n_items must be positive")
        if n_cmp < 1:
            raise ValidationError("a dataset needs at least one comparison")
        if self.offsets.shape != (n_cmp + 1,) or self.offsets[0] != 0 \
                or self.offsets[-1] != self.members.shape[0]:
            raise ValidationError("offsets do not describe the member array")
        sizes = np.diff(self.offsets)
        if np.any(sizes < 2):
            bad = int(np.flatnonzero(sizes < 2)[0])
            raise ValidationError(f"comparison {bad} has fewer than two items")
        if self.members.min() < 0 or self.members.max() >= self.n_items:
            raise ValidationError(
                f"item index outside [0, {self.n_items}) in comparisons")
        if self.groups.shape != (n_cmp,):
            raise ValidationError("groups must have one entry per comparison")
        if self.labels is not None and len(self.labels) != self.n_items:
            raise ValidationError("labels must name every item")
        lid = self.comparison_ids
        # duplicates inside a set: sort (comparison, item) pairs
        key = lid * self.n_items + self.members
        if np.unique(key).shape[0] != key.shape[0]:
            raise ValidationError("a choice set contains duplicate items")
        hits = np.bincount(lid, weights=(self.members == self.winners[lid]),
                           minlength=n_cmp)
        if np.any(hits != 1):
            bad = int(np.flatnonzero(hits != 1)[0])
            raise ValidationError(
                f"winner {int(self.winners[bad])} not in choice set of "
                f"comparison {bad}")

    # construction -----------------------------------------------------

    @classmethod
    def from_comparisons(cls, comparisons: Iterable[Comparison | tuple],
                         n_items: int | None = None, labels=None, groups=None):
        """Build a dataset from ``Comparison`` objects or ``(set, winner)`` pairs."""
        sets, winners = [], []
        for c in comparisons:
            if not isinstance(c, Comparison):
                c = Comparison(tuple(c[0]), c[1])
            sets.append(c.choice_set)
            winners.append(c.winner)
        if not sets:
            raise ValidationError("a dataset needs at least one comparison")
        sizes = np.fromiter((len(s) for s in sets), dtype=np.int64, count=len(sets))
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        members = np.fromiter((i for s in sets for i in s), dtype=np.int64,
                              count=int(offsets[-1]))
        if n_items is None:
            n_items = int(members.max()) + 1
        return cls(n_items, members, offsets, winners, groups=groups, labels=labels)

    @classmethod
    def from_rankings(cls, rankings, n_items: int | None = None, labels=None):
        """Multi-level break full rankings into one dataset.

        ``rankings`` is either a 2-d integer array (one ranking per row, all of
        the same length) or a sequence of rankings of arbitrary lengths.  All
        selections coming from one ranking share a group id.
        """
        if isinstance(rankings, np.ndarray) and rankings.ndim == 2:
            R = np.asarray(rankings, dtype=np.int64)
            n_rank, B = R.shape
            if B < 2:
                raise ValidationError("a full ranking needs at least two items")
            srt = np.sort(R, axis=1)
            if np.any(srt[:, 1:] == srt[:, :-1]):
                raise ValidationError("a ranking contains duplicate items")
            cols = np.concatenate([np.arange(t, B) for t in range(B - 1)])
            members = R[:, cols].ravel()
            winners = R[:, :B - 1].ravel()
            sizes = np.tile(np.arange(B, 1, -1), n_rank)
            offsets = np.concatenate([[0], np.cumsum(sizes)])
            groups = np.repeat(np.arange(n_rank), B - 1)
            if n_items is None:
                n_items = int(R.max()) + 1
            return cls(n_items, members, offsets, winners, groups=groups,
                       labels=labels)
        comps, groups = [], []
        for g, r in enumerate(rankings):
            broken = break_full_ranking(r)
            comps.extend(broken)
            groups.extend([g] * len(broken))
        return cls.from_comparisons(comps, n_items=n_items, labels=labels,
                                    groups=groups)

    # views --------------------------------------------------------------

    @property
    def n_comparisons(self) -> int:
        return int(self.winners.shape[0])

    def __len__(self) -> int:
        return self.n_comparisons

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.offsets)

    @property
    def comparison_ids(self) -> np.ndarray:
        """Comparison index ``l`` for every entry of :attr:`members`."""
        ids = self._cache.get("lid")
        if ids is None:
            ids = np.repeat(np.arange(self.n_comparisons), self.sizes)
            ids.setflags(write=False)
            self._cache["lid"] = ids
        return ids

    @property
    def n_groups(self) -> int:
        return int(self.groups.max()) + 1

    def incidence(self) -> sp.csr_matrix:
        """Sparse ``|D| x n`` 0/1 matrix with entry ``(l, i) = 1(i in A_l)``."""
        inc = self._cache.get("inc")
        if inc is None:
            data = np.ones(self.members.shape[0])
            inc = sp.csr_matrix((data, self.members, self.offsets),
                                shape=(self.n_comparisons, self.n_items))
            self._cache["inc"] = inc
        return inc

    def __getitem__(self, l: int) -> Comparison:
        lo, hi = self.offsets[l], self.offsets[l + 1]
        return Comparison(tuple(self.members[lo:hi].tolist()), int(self.winners[l]))

    def __iter__(self) -> Iterator[Comparison]:
        for l in range(self.n_comparisons):
            yield self[l]

    def subset(self, index) -> "ComparisonDataset":
        """Dataset made of the comparisons selected by ``index`` (in that order)."""
        index = np.asarray(index, dtype=np.int64)
        sizes = self.sizes[index]
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        starts = self.offsets[index]
        pos = np.repeat(starts - offsets[:-1], sizes) + np.arange(offsets[-1])
        return ComparisonDataset(self.n_items, self.members[pos], offsets,
                                 self.winners[index], groups=self.groups[index],
                                 labels=self.labels, validate=False)

    def relabel(self, perm) -> "ComparisonDataset":
        """Rename item ``i`` to ``perm[i]``."""
        perm = np.asarray(perm, dtype=np.int64)
        labels = None
        if self.labels is not None:
            labels = [None] * self.n_items
            for i, p in enumerate(perm):
                labels[p] = self.labels[i]
        return ComparisonDataset(self.n_items, perm[self.members], self.offsets,
                                 perm[self.winners], groups=self.groups,
                                 labels=labels)

    def item_index(self, key) -> int:
        """Resolve an item given as index or label."""
        if self.labels is not None and not isinstance(key, (int, np.integer)):
            try:
                return self.labels.index(str(key))
            except ValueError:
                pass
        try:
            i = int(key)
        except (TypeError, ValueError):
            raise ValidationError(f"unknown item {key!r}") from None
        if not 0 <= i < self.n_items:
            raise ValidationError(f"item {i} outside [0, {self.n_items})")
        return i

    def __repr__(self) -> str:
        return (f"ComparisonDataset(n_items={self.n_items}, "
                f"n_comparisons={self.n_comparisons})")


def _dense_codes(x: np.ndarray) -> np.ndarray:
    """Relabel arbitrary group keys to ``0..G-1`` by first appearance."""
    _, first, inv = np.unique(x, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first, kind="stable"), kind="stable")
    return order[inv].astype(np.int64)


# --------------------------------------------------------------------------
# CSV ingestion
# --------------------------------------------------------------------------

def _read_text(source) -> str:
    if isinstance(source, (bytes, bytearray)):
        return bytes(source).decode("utf-8")
    if isinstance(source, str):
        return source
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return data


def _is_index(tok: str) -> bool:
    return tok.isdigit()


def parse_choice_csv(source: bytes | str | IO, *, break_rankings: bool = False,
                     labels: bool | None = None) -> ComparisonDataset:
    """Parse comparison records.

    Each data row is ``winner,item,item,...``; the winner may also appear among
    the items.  Other accepted rows:

    * ``winner,set`` header (skipped), blank lines and ``#`` comments;
    * ``n=<int>`` to fix the number of items;
    * ``rank:a>b>c`` full rankings, broken into nested selections when
      ``break_rankings`` is set (rejected otherwise).

    Items are non-negative integer indices, or arbitrary labels mapped to
    indices by first appearance.  ``labels=None`` decides from the first data
    row; once in index mode any non-integer token is a parse error.
    """
    text = _read_text(source)
    sets: list[tuple[int, ...]] = []
    winners: list[int] = []
    groups: list[int] = []
    n_directive = None
    label_map: dict[str, int] = {}
    mode = labels
    group = 0
    seen_data = False

    def to_index(tok: str, lineno: int) -> int:
        if mode:
            return label_map.setdefault(tok, len(label_map))
        if not _is_index(tok):
            raise ParseError(f"non-integer item token {tok!r}", lineno)
        return int(tok)

    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        low = line.lower().replace(" ", "")
        if low.startswith("n="):
            try:
                n_directive = int(low[2:])
            except ValueError:
                raise ParseError(f"bad n= directive {line!r}", lineno) from None
            if n_directive < 1:
                raise ParseError("n= must be positive", lineno)
            continue
        if not seen_data and low.startswith("winner"):
            continue
        if low.startswith("rank:"):
            body = line.split(":", 1)[1]
            toks = [t.strip() for t in body.split(">")]
            if any(t == "" for t in toks):
                raise ParseError(f"empty item in ranking {line!r}", lineno)
            if mode is None:
                mode = not all(_is_index(t) for t in toks)
            seen_data = True
            if not break_rankings:
                raise ParseError("full-ranking row needs multilevel breaking "
                                 "(--break=multilevel)", lineno)
            items = [to_index(t, lineno) for t in toks]
            try:
                broken = break_full_ranking(items)
            except ValidationError as exc:
                raise ValidationError(str(exc), lineno) from None
            for c in broken:
                sets.append(c.choice_set)
                winners.append(c.winner)
                groups.append(group)
            group += 1
            continue
        toks = [t.strip() for t in line.split(",")]
        toks = [t for t in toks if t != ""]
        if mode is None:
            mode = not all(_is_index(t) for t in toks)
        seen_data = True
        idx = [to_index(t, lineno) for t in toks]
        if len(idx) < 2:
            raise ValidationError("row has no choice set", lineno)
        w, rest = idx[0], idx[1:]
        items = list(dict.fromkeys(rest))
        if w not in items:
            raise ValidationError(f"winner {toks[0]} not in "
                                  f"{{{', '.join(toks[1:])}}}", lineno)
        if len(items) < 2:
            raise ValidationError("choice set has fewer than two items", lineno)
        if len(items) != len(rest):
            raise ValidationError("choice set lists an item twice", lineno)
        sets.append(tuple(items))
        winners.append(w)
        groups.append(group)
        group += 1

    if not sets:
        raise ValidationError("no comparisons found")
    if mode:
        names = sorted(label_map, key=label_map.get)
        n_items = len(names)
        if n_directive is not None:
            if n_directive < n_items:
                raise ValidationError(f"n={n_directive} but {n_items} labels seen")
            names += [f"_{k}" for k in range(n_items, n_directive)]
            n_items = n_directive
        lab = names
    else:
        n_items = 1 + max(max(s) for s in sets)
        if n_directive is not None:
            if n_directive < n_items:
                raise ValidationError(
                    f"n={n_directive} but item {n_items - 1} referenced")
            n_items = n_directive
        lab = None
    comps = [Comparison(s, w) for s, w in zip(sets, winners)]
    return ComparisonDataset.from_comparisons(comps, n_items=n_items, labels=lab,
                                              groups=groups)


def format_choice_csv(ds: ComparisonDataset) -> str:
    """Inverse of :func:`parse_choice_csv` for plain comparison rows."""
    out = [f"n={ds.n_items}"]
    name = (lambda i: ds.labels[i]) if ds.labels is not None else str
    for c in ds:
        out.append(",".join([name(c.winner)] + [name(i) for i in c.choice_set]))
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# Diagnostics
# --------------------------------------------------------------------------

@dataclass
class GraphDiagnostics:
    """Degree counts and rankability checks for a comparison graph.

    ``n_dagger`` is the largest number of comparisons any item takes part in,
    ``n_ddagger`` the largest number of comparisons any pair shares.
    """

    n_dagger: int
    n_ddagger: int
    per_item_counts: np.ndarray
    per_item_win_counts: np.ndarray
    per_item_loss_counts: np.ndarray
    ratio_check: float
    strongly_connected: bool | None = None
    omega_spectrum: tuple[float, float] | None = None
    flags: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.flags

    def as_dict(self) -> dict:
        return {
            "n_dagger": self.n_dagger,
            "n_ddagger": self.n_ddagger,
            "per_item_counts": self.per_item_counts.tolist(),
            "per_item_win_counts": self.per_item_win_counts.tolist(),
            "per_item_loss_counts": self.per_item_loss_counts.tolist(),
            "ratio_check": self.ratio_check,
            "strongly_connected": self.strongly_connected,
            "omega_spectrum": (None if self.omega_spectrum is None
                               else list(self.omega_spectrum)),
            "flags": list(self.flags),
        }


def degree_stats(ds: ComparisonDataset) -> GraphDiagnostics:
    """Exact per-item and per-pair comparison counts."""
    n = ds.n_items
    counts = np.bincount(ds.members, minlength=n)
    wins = np.bincount(ds.winners, minlength=n)
    inc = ds.incidence()
    co = (inc.T @ inc).tocoo()
    off = co.row != co.col
    n_ddagger = int(co.data[off].max()) if np.any(off) else 0
    n_dagger = int(counts.max())
    ratio = max(n_ddagger, 1) * math.sqrt(n) * math.sqrt(math.log(n)) / n_dagger \
        if n > 1 else 0.0
    return GraphDiagnostics(
        n_dagger=n_dagger,
        n_ddagger=n_ddagger,
        per_item_counts=counts,
        per_item_win_counts=wins,
        per_item_loss_counts=counts - wins,
        ratio_check=float(ratio),
    )


def win_graph(ds: ComparisonDataset) -> sp.csr_matrix:
    """Directed graph with an edge ``i -> j`` whenever ``j`` beat ``i``."""
    lid = ds.comparison_ids
    win = ds.winners[lid]
    mask = ds.members != win
    n = ds.n_items
    g = sp.coo_matrix((np.ones(mask.sum()), (ds.members[mask], win[mask])),
                      shape=(n, n)).tocsr()
    g.sum_duplicates()
    return g


def check_rankability(ds: ComparisonDataset, compute_spectrum: bool = False,
                      scheme=None) -> GraphDiagnostics:
    """Full diagnostics; never raises on bad data, only records flags.

    With ``compute_spectrum`` the plug-in matrix ``Omega`` (``-P_ji pi_j`` off
    the diagonal, ``sum_j P_ij pi_i`` on it) is formed from a spectral fit and
    the extreme eigenvalues of its symmetric part on the complement of the
    all-ones vector are reported.
    """
    diag = degree_stats(ds)
    n = ds.n_items
    flags = diag.flags
    for i in np.flatnonzero(diag.per_item_counts == 0):
        flags.append(f"item {i} is never compared")
    for i in np.flatnonzero((diag.per_item_win_counts == 0)
                            & (diag.per_item_counts > 0)):
        flags.append(f"item {i} has zero wins")
    for i in np.flatnonzero((diag.per_item_loss_counts == 0)
                            & (diag.per_item_counts > 0)):
        flags.append(f"item {i} has zero losses")
    n_comp, _ = connected_components(win_graph(ds), directed=True,
                                     connection="strong")
    diag.strongly_connected = bool(n_comp == 1)
    if not diag.strongly_connected:
        flags.append(f"win graph has {n_comp} strongly connected components")
    if compute_spectrum and not flags and n > 1:
        from .spectral import WeightScheme, build_transition, power_iteration

        T = build_transition(ds, scheme or WeightScheme.set_size(), check=False)
        try:
            pi = power_iteration(T.P).pi
        except ArithmeticError:
            return diag
        omega = -(T.P * pi[:, None]).T
        np.fill_diagonal(omega, (T.off_mass / T.d) * pi)
        sym = 0.5 * (omega + omega.T)
        # orthonormal basis of the complement of the ones vector
        q, _ = np.linalg.qr(np.column_stack([np.ones(n), np.eye(n)[:, :n - 1]]))
        basis = q[:, 1:]
        ev = np.linalg.eigvalsh(basis.T @ sym @ basis)
        diag.omega_spectrum = (float(ev[0]), float(ev[-1]))
    return diag
