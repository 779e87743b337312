"""Observed categorical sequences and their CSV representation."""
import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import IngestError, InputError


@dataclass(frozen=True, eq=False)
class Dataset:
    """Equal-length categorical sequences stored as a frequency table.

    Attributes:
        configs: (m, T) int array of distinct response configurations,
            lexicographically sorted, entries in 0..c-1.
        counts: (m,) int array, the frequency of each configuration.
        c: number of response categories.
    """

    configs: np.ndarray
    counts: np.ndarray
    c: int

    def __post_init__(self):
        configs = np.array(self.configs, dtype=np.int64)
        counts = np.array(self.counts, dtype=np.int64).ravel()
        if configs.ndim != 2:
            raise InputError("configs must be a 2-d array (configurations x occasions)")
        if configs.shape[0] == 0:
            raise InputError("dataset is empty")
        if configs.shape[1] < 1:
            raise InputError("sequences must have at least one occasion")
        if counts.shape[0] != configs.shape[0]:
            raise InputError("counts and configs disagree in length")
        if np.any(counts < 1):
            raise InputError("every configuration count must be >= 1")
        if self.c < 2:
            raise InputError("need at least two response categories")
        if configs.min() < 0 or configs.max() >= self.c:
            raise InputError(f"response codes must lie in 0..{self.c - 1}")
        for arr in (configs, counts):
            arr.setflags(write=False)
        object.__setattr__(self, "configs", configs)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "c", int(self.c))

    @classmethod
    def from_sequences(cls, sequences, c=None):
        """Collapse one row per unit into the frequency table.

        ``c`` defaults to one more than the largest observed code.
        """
        seqs = np.asarray(sequences)
        if seqs.ndim != 2 or seqs.shape[0] == 0:
            raise InputError("need a non-empty 2-d array of sequences")
        if not np.issubdtype(seqs.dtype, np.integer):
            raise InputError("sequences must hold integer codes")
        configs, counts = np.unique(seqs, axis=0, return_counts=True)
        if c is None:
            c = max(int(configs.max()) + 1, 2)
        return cls(configs, counts, c)

    @property
    def n(self):
        return int(self.counts.sum())

    @property
    def T(self):
        return self.configs.shape[1]

    @property
    def n_configs(self):
        return self.configs.shape[0]

    def sequences(self):
        """Expand back to one row per unit, in configuration order."""
        return np.repeat(self.configs, self.counts, axis=0)

    def same_as(self, other):
        return (
            self.c == other.c
            and self.configs.shape == other.configs.shape
            and np.array_equal(self.configs, other.configs)
            and np.array_equal(self.counts, other.counts)
        )


def read_csv(path_or_file, one_based=False, categories=None):
    """Read a wide CSV with one unit per row and one integer code per occasion.

    A header row is allowed if none of its cells parse as integers.  Missing
    cells are rejected; this package does not handle missing data.

    Raises:
        IngestError: with the 1-based row/column of the first bad cell.
    """
    if hasattr(path_or_file, "read"):
        text = path_or_file.read()
    else:
        try:
            with open(path_or_file, newline="") as fh:
                text = fh.read()
        except OSError as exc:
            raise IngestError(f"cannot read {path_or_file}: {exc.strerror}") from None
    rows = [r for r in csv.reader(io.StringIO(text))]
    numbered = [(i + 1, r) for i, r in enumerate(rows) if any(cell.strip() for cell in r)]
    if not numbered:
        raise IngestError("no data rows found")

    def _is_int(cell):
        try:
            int(cell.strip())
        except ValueError:
            return False
        return True

    first_no, first = numbered[0]
    if not any(_is_int(cell) for cell in first):
        numbered = numbered[1:]
        if not numbered:
            raise IngestError("no data rows found after header")

    width = len(numbered[0][1])
    data = np.empty((len(numbered), width), dtype=np.int64)
    for r, (line_no, row) in enumerate(numbered):
        if len(row) != width:
            raise IngestError(f"expected {width} cells, found {len(row)}", row=line_no)
        for col, cell in enumerate(row):
            cell = cell.strip()
            if cell == "" or cell.upper() in ("NA", "NAN"):
                raise IngestError("missing value", row=line_no, column=col + 1)
            try:
                data[r, col] = int(cell)
            except ValueError:
                raise IngestError(f"non-integer cell {cell!r}", row=line_no, column=col + 1) from None
    if one_based:
        data -= 1
    if data.min() < 0:
        r, col = np.argwhere(data < 0)[0]
        raise IngestError("negative category code", row=numbered[r][0], column=int(col) + 1)
    if categories is not None:
        if data.max() >= categories:
            r, col = np.argwhere(data >= categories)[0]
            raise IngestError(
                f"code exceeds the declared {categories} categories", row=numbered[r][0], column=int(col) + 1
            )
        c = categories
    else:
        c = None
    try:
        return Dataset.from_sequences(data, c=c)
    except InputError as exc:
        raise IngestError(str(exc)) from None


def write_csv(dataset, path_or_file, one_based=False):
    """Write one row per unit; inverse of :func:`read_csv`."""
    seqs = dataset.sequences() + (1 if one_based else 0)
    header = [f"t{t + 1}" for t in range(dataset.T)]
    if hasattr(path_or_file, "write"):
        _write_rows(path_or_file, header, seqs)
    else:
        with open(path_or_file, "w", newline="") as fh:
            _write_rows(fh, header, seqs)


def _write_rows(fh, header, seqs):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    w.writerows(seqs.tolist())
