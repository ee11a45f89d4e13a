"""Perfect hash families that drive parallel detector calibration.

A family is an N x k table of digits in {0..v-1}; row i is the i-th hash
function.  The family is t-perfect when every size-t subset of inputs is
assigned t distinct digits by at least one row.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from importlib import resources

import numpy as np

BUNDLED_15_16_3 = "phf_15_16_3.txt"


@dataclass(frozen=True)
class HashFamily:
    """N hash functions mapping k inputs to digits below ``n_values``."""

    table: np.ndarray
    n_values: int
    t: int

    def __post_init__(self):
        table = np.asarray(self.table, dtype=np.int64)
        if table.ndim != 2:
            raise ValueError("table must be two-dimensional")
        if table.min(initial=0) < 0 or table.max(initial=0) >= self.n_values:
            raise ValueError("table entries must lie in [0, n_values)")
        object.__setattr__(self, "table", table)

    @property
    def n_functions(self) -> int:
        return self.table.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.table.shape[1]


def phf_2local(k: int) -> HashFamily:
    """Analytic 2-perfect family: row i is bit i of the input index.

    Inputs are 0-based; column x holds the binary digits of x, so any two
    distinct inputs differ in some row.  N = ceil(log2 k) rows suffice.
    """
    if k < 2:
        raise ValueError("need at least two inputs")
    n = max(1, (k - 1).bit_length())
    table = np.array([[(x >> i) & 1 for x in range(k)] for i in range(n)])
    return HashFamily(table, n_values=2, t=2)


def _separated(values: np.ndarray) -> np.ndarray:
    """Rows of ``values`` (..., t) whose last-axis entries are all distinct."""
    s = np.sort(values, axis=-1)
    return np.all(np.diff(s, axis=-1) != 0, axis=-1)


def verify_phf(
    family: HashFamily, t: int, chunk: int = 200_000
) -> tuple[bool, tuple | None]:
    """Exhaustively check t-perfectness over all C(k, t) input subsets.

    Returns ``(True, None)`` or ``(False, subset)`` with the first violating
    subset in lexicographic order.
    """
    if t > family.n_values:
        raise ValueError("t cannot exceed the number of output values")
    combos = itertools.combinations(range(family.n_inputs), t)
    while True:
        batch = list(itertools.islice(combos, chunk))
        if not batch:
            return True, None
        idx = np.array(batch)
        vals = family.table[:, idx]  # (N, m, t)
        covered = _separated(vals).any(axis=0)
        if not covered.all():
            return False, tuple(int(x) for x in batch[int(np.argmin(covered))])


def generate_phf_random(
    k: int,
    t: int,
    max_functions: int,
    seed: int,
    candidates_per_round: int = 200,
) -> HashFamily:
    """Greedy randomized construction of a t-perfect family with v = t.

    Each round draws uniform candidate rows and keeps the one separating the
    most still-unseparated t-subsets, breaking ties toward the
    lexicographically smallest row so the result is a deterministic function
    of the seed.  Raises ``RuntimeError`` when ``max_functions`` rows do not
    reach perfectness.
    """
    if t < 2:
        raise ValueError("t must be at least 2")
    if k < t:
        raise ValueError("need at least t inputs")
    rng = np.random.default_rng(seed)
    subsets = np.array(list(itertools.combinations(range(k), t)))
    open_mask = np.ones(len(subsets), dtype=bool)
    rows: list[np.ndarray] = []
    while open_mask.any():
        if len(rows) >= max_functions:
            raise RuntimeError(
                f"budget of {max_functions} functions exhausted with "
                f"{int(open_mask.sum())} subsets unseparated"
            )
        cands = rng.integers(0, t, size=(candidates_per_round, k))
        vals = cands[:, subsets[open_mask]]  # (c, m, t)
        sep = _separated(vals)
        coverage = sep.sum(axis=1)
        best = int(coverage.max())
        ties = np.flatnonzero(coverage == best)
        pick = min(ties, key=lambda i: tuple(cands[i]))
        rows.append(cands[pick])
        open_idx = np.flatnonzero(open_mask)
        open_mask[open_idx[sep[pick]]] = False
    return HashFamily(np.array(rows), n_values=t, t=t)


def save_phf(family: HashFamily, path) -> None:
    """Write the text format: header ``N k v t`` then one row per line."""
    lines = [f"{family.n_functions} {family.n_inputs} {family.n_values} {family.t}"]
    for row in family.table:
        lines.append(" ".join(str(int(x)) for x in row))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_phf(text: str) -> HashFamily:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    n, k, v, t = (int(x) for x in lines[0].split())
    table = np.array([[int(x) for x in ln.split()] for ln in lines[1 : n + 1]])
    if table.shape != (n, k):
        raise ValueError("table shape does not match header")
    return HashFamily(table, n_values=v, t=t)


def load_phf(path) -> HashFamily:
    with open(path, "r", encoding="ascii") as fh:
        return _parse_phf(fh.read())


def bundled_phf_15_16_3() -> HashFamily:
    """The shipped 3-perfect family with 15 functions on 16 inputs."""
    text = resources.files("qrem").joinpath(f"data/{BUNDLED_15_16_3}").read_text()
    return _parse_phf(text)
