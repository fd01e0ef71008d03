"""Decision trees over categorical attributes with a Dirichlet-multinomial score.

Each leaf is scored by its marginal likelihood under a symmetric Dirichlet
prior (total concentration ``alpha_total`` split evenly over the ``K``
classes). Trees grow greedily: a node splits on the unused attribute whose
children score best, and only if that beats the node kept as a leaf.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import Duration
from .errors import InvalidInput


@dataclass(frozen=True)
class Attribute:
    name: str
    domain: tuple[str, ...]

    def index(self, value: str) -> int:
        try:
            return self.domain.index(value)
        except ValueError:
            raise InvalidInput(f"value {value!r} outside the domain of {self.name!r}") from None


@dataclass
class Dataset:
    """Rows of categorical attribute values with an integer class label."""

    schema: tuple[Attribute, ...]
    rows: list[tuple[tuple[str, ...], int]]
    arity: int
    classes: tuple[str, ...] | None = None

    def __post_init__(self):
        self.schema = tuple(self.schema)
        if self.arity < 2:
            raise InvalidInput("target arity must be at least 2")
        if self.classes is not None and len(self.classes) != self.arity:
            raise InvalidInput("class names do not match arity")
        p = len(self.schema)
        for values, label in self.rows:
            if len(values) != p:
                raise InvalidInput("row length does not match schema")
            for a, v in zip(self.schema, values):
                a.index(v)
            if not 0 <= label < self.arity:
                raise InvalidInput(f"label {label} outside [0, {self.arity})")

    @classmethod
    def from_dicts(
        cls,
        schema: Sequence[Attribute],
        rows: Iterable[tuple[Mapping[str, str], int]],
        arity: int,
        classes: Sequence[str] | None = None,
    ) -> "Dataset":
        names = [a.name for a in schema]
        return cls(
            tuple(schema),
            [(tuple(attrs[n] for n in names), label) for attrs, label in rows],
            arity,
            tuple(classes) if classes is not None else None,
        )

    def __len__(self) -> int:
        return len(self.rows)

    def encode(self) -> tuple[np.ndarray, np.ndarray]:
        X = np.array(
            [[a.domain.index(v) for a, v in zip(self.schema, values)] for values, _ in self.rows],
            dtype=np.int64,
        ).reshape(len(self.rows), len(self.schema))
        y = np.array([label for _, label in self.rows], dtype=np.int64)
        return X, y


def leaf_score(counts: Sequence[int], alpha_total: float) -> float:
    """Log marginal likelihood of ``counts`` under a symmetric Dirichlet."""
    if alpha_total <= 0:
        raise InvalidInput("alpha_total must be positive")
    k = len(counts)
    a_k = alpha_total / k
    n = sum(counts)
    score = math.lgamma(alpha_total) - math.lgamma(alpha_total + n)
    for c in counts:
        if c < 0:
            raise InvalidInput("negative count")
        if c:
            score += math.lgamma(a_k + c) - math.lgamma(a_k)
    return score


@dataclass
class Node:
    counts: tuple[int, ...]
    split: str | None = None
    children: dict[str, "Node"] = field(default_factory=dict)

    @property
    def is_leaf(self) -> bool:
        return self.split is None

    @property
    def n(self) -> int:
        return sum(self.counts)


@dataclass
class DecisionTree:
    schema: tuple[Attribute, ...]
    arity: int
    alpha_total: float
    root: Node
    classes: tuple[str, ...] | None = None

    def leaves(self) -> list[Node]:
        out, stack = [], [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                out.append(node)
            else:
                stack.extend(node.children[v] for v in sorted(node.children, reverse=True))
        return out

    def score(self) -> float:
        return sum(leaf_score(leaf.counts, self.alpha_total) for leaf in self.leaves())

    def route(self, attrs: Mapping[str, str]) -> Node:
        """Deepest node on the path for ``attrs``.

        A value never seen at a split has no child; such rows stop at the
        split node itself and use its counts.
        """
        for a in self.schema:
            if a.name not in attrs:
                raise InvalidInput(f"missing attribute {a.name!r}")
            a.index(attrs[a.name])
        node = self.root
        while not node.is_leaf:
            child = node.children.get(attrs[node.split])
            if child is None:
                break
            node = child
        return node

    def structure(self):
        """Nested tuples, for structural equality checks."""

        def walk(node: Node):
            return (node.counts, node.split, tuple((v, walk(c)) for v, c in sorted(node.children.items())))

        return walk(self.root)

    # serialization -------------------------------------------------------

    def to_records(self) -> list[dict]:
        header = {
            "schema": [[a.name, list(a.domain)] for a in self.schema],
            "arity": self.arity,
            "alpha_total": self.alpha_total,
            "classes": list(self.classes) if self.classes else None,
        }
        records = [header]

        def walk(node: Node, parent: int | None, value: str | None):
            nid = len(records) - 1
            records.append({"node": nid, "parent": parent, "value": value, "split": node.split, "counts": list(node.counts)})
            for v in sorted(node.children):
                walk(node.children[v], nid, v)

        walk(self.root, None, None)
        return records

    @classmethod
    def from_records(cls, records: Sequence[Mapping]) -> "DecisionTree":
        header, *rows = records
        nodes: dict[int, Node] = {}
        root = None
        for r in rows:
            node = Node(tuple(r["counts"]), r["split"])
            nodes[r["node"]] = node
            if r["parent"] is None:
                root = node
            else:
                nodes[r["parent"]].children[r["value"]] = node
        if root is None:
            raise InvalidInput("model file has no root node")
        return cls(
            tuple(Attribute(n, tuple(d)) for n, d in header["schema"]),
            header["arity"],
            header["alpha_total"],
            root,
            tuple(header["classes"]) if header.get("classes") else None,
        )

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("".join(json.dumps(r, separators=(",", ":")) + "\n" for r in self.to_records()))

    @classmethod
    def load(cls, path: str | Path) -> "DecisionTree":
        lines = Path(path).read_text().splitlines()
        return cls.from_records([json.loads(x) for x in lines if x.strip()])


# Score gains below this are rounding noise; ties then fall to schema order.
_TIE_EPS = 1e-9


def _counts(y: np.ndarray, k: int) -> tuple[int, ...]:
    return tuple(int(c) for c in np.bincount(y, minlength=k))


def learn_tree(data: Dataset, alpha_total: float | None = None, min_leaf: int = 5) -> DecisionTree:
    """Grow a tree greedily; ``alpha_total`` defaults to the class count."""
    if not len(data):
        raise InvalidInput("cannot learn from an empty dataset")
    k = data.arity
    alpha = float(k if alpha_total is None else alpha_total)
    if alpha <= 0:
        raise InvalidInput("alpha_total must be positive")
    X, y = data.encode()

    def grow(idx: np.ndarray, unused: tuple[int, ...]) -> Node:
        counts = _counts(y[idx], k)
        node = Node(counts)
        best_score = leaf_score(counts, alpha)
        best = None
        for a in unused:
            col = X[idx, a]
            parts = [idx[col == v] for v in np.unique(col)]
            if any(len(p) < min_leaf for p in parts):
                continue
            s = sum(leaf_score(_counts(y[p], k), alpha) for p in parts)
            if s > best_score + _TIE_EPS:
                best_score, best = s, a
        if best is None:
            return node
        attr = data.schema[best]
        node.split = attr.name
        rest = tuple(a for a in unused if a != best)
        col = X[idx, best]
        for v in np.unique(col):
            node.children[attr.domain[v]] = grow(idx[col == v], rest)
        return node

    root = grow(np.arange(len(data)), tuple(range(len(data.schema))))
    return DecisionTree(data.schema, k, alpha, root, data.classes)


def predict_distribution(tree: DecisionTree, attrs: Mapping[str, str]) -> tuple[float, ...]:
    """Smoothed class probabilities at the node ``attrs`` routes to."""
    node = tree.route(attrs)
    a_k = tree.alpha_total / tree.arity
    denom = node.n + tree.alpha_total
    return tuple((c + a_k) / denom for c in node.counts)


def evaluate_holdout(tree: DecisionTree, holdout: Dataset) -> dict[str, float]:
    """Accuracy (argmax, ties to the lowest class) and mean log-loss."""
    if not len(holdout):
        raise InvalidInput("empty holdout set")
    if [a.name for a in holdout.schema] != [a.name for a in tree.schema] or holdout.arity != tree.arity:
        raise InvalidInput("holdout schema does not match the tree")
    names = [a.name for a in tree.schema]
    correct = 0
    loss = 0.0
    for values, label in holdout.rows:
        p = predict_distribution(tree, dict(zip(names, values)))
        correct += int(max(range(len(p)), key=lambda i: (p[i], -i)) == label)
        loss -= math.log(p[label])
    n = len(holdout)
    return {"accuracy": correct / n, "log_loss": loss / n, "n": n}


# ---------------------------------------------------------------------------
# Duration discretization

DEFAULT_BIN_EDGES_MIN = (2, 5, 10, 15, 30, 60, 120, 240, 480)


@dataclass(frozen=True)
class DurationBinning:
    """Bins ``[0, e1), [e1, e2), ..., [e_last, inf)``; edges in minutes."""

    edges_min: tuple[float, ...] = DEFAULT_BIN_EDGES_MIN

    def __post_init__(self):
        e = tuple(self.edges_min)
        object.__setattr__(self, "edges_min", e)
        if not e or e[0] <= 0 or any(b <= a for a, b in zip(e, e[1:])):
            raise InvalidInput("bin edges must be positive and strictly increasing")

    @property
    def edges_s(self) -> tuple[int, ...]:
        return tuple(int(round(m * 60)) for m in self.edges_min)

    @property
    def n_bins(self) -> int:
        return len(self.edges_min) + 1

    def labels(self) -> tuple[str, ...]:
        lo = (0,) + self.edges_min
        names = [f"[{a:g},{b:g})" for a, b in zip(lo, self.edges_min)]
        return tuple(names + [f"[{self.edges_min[-1]:g},inf)"])


def bin_duration(wait: Duration, binning: DurationBinning = DurationBinning()) -> int:
    """Index of the half-open bin holding ``wait`` seconds."""
    return bisect.bisect_right(binning.edges_s, wait)
