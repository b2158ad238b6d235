import csv
import logging
import os
from abc import ABC, abstractmethod
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from quotient.common import FileFormatException, InvalidInputException
from quotient.geometry import is_centered
from quotient.models import DrawSet


class BaseReader(ABC):
    """
    Abstract base class for all file readers.
    Every reader implements read() and fails with FileFormatException naming
    the file and line, so the CLI can map it to the I/O exit status.
    """

    def __init__(self, file_path: str):
        self.file_path = file_path
        self.logger = logging.getLogger(self.__class__.__name__)

    @abstractmethod
    def read(self):
        """Parse the file and return the validated object."""
        pass

    def _data_lines(self) -> List[Tuple[int, List[str]]]:
        """(line number, tokens) for every non-blank, non-comment line."""
        if not os.path.exists(self.file_path):
            self.logger.error(f"File not found: {self.file_path}")
            raise FileFormatException(f"File not found: {self.file_path}")
        try:
            with open(self.file_path, "r", encoding="utf-8") as f:
                lines = []
                for line_num, line in enumerate(f, start=1):
                    stripped = line.strip()
                    if not stripped or stripped.startswith("#"):
                        continue
                    lines.append((line_num, stripped.split()))
                return lines
        except (OSError, UnicodeDecodeError) as e:
            raise FileFormatException(f"Cannot read {self.file_path}: {str(e)}")

    def _floats(self, tokens: List[str], line_num: int) -> List[float]:
        try:
            values = [float(token) for token in tokens]
        except ValueError:
            raise FileFormatException(f"{self.file_path}:{line_num}: expected numbers, got {' '.join(tokens)}")
        if not all(np.isfinite(values)):
            raise FileFormatException(f"{self.file_path}:{line_num}: non-finite value")
        return values

    def _ints(self, tokens: List[str], line_num: int) -> List[int]:
        try:
            return [int(token) for token in tokens]
        except ValueError:
            raise FileFormatException(f"{self.file_path}:{line_num}: expected integers, got {' '.join(tokens)}")


class InterceptsReader(BaseReader):
    """One alpha draw per line."""

    def read(self) -> np.ndarray:
        values = []
        for line_num, tokens in self._data_lines():
            if len(tokens) != 1:
                raise FileFormatException(f"{self.file_path}:{line_num}: expected one value per line")
            values.extend(self._floats(tokens, line_num))
        return np.array(values)


class DrawsFileReader(BaseReader):
    """
    Header "n r M", then M blocks of n lines with r reals each.

    STRATEGY:
    - Counts must match the header exactly
    - Uncentered blocks are recentered (with a warning) rather than rejected
    """

    def __init__(self, file_path: str, intercepts_path: Optional[str] = None):
        super().__init__(file_path)
        self.intercepts_path = intercepts_path

    def read(self) -> DrawSet:
        self.logger.info(f"📄 Reading draws from {self.file_path}")
        lines = self._data_lines()
        if not lines:
            raise FileFormatException(f"{self.file_path}: empty draws file")
        header_num, header = lines[0]
        if len(header) != 3:
            raise FileFormatException(f"{self.file_path}:{header_num}: header must be 'n r M'")
        n, r, M = self._ints(header, header_num)
        if n < 2 or r < 1 or M < 1:
            raise FileFormatException(f"{self.file_path}: invalid header n={n} r={r} M={M}")
        body = lines[1:]
        if len(body) != n * M:
            raise FileFormatException(f"{self.file_path}: expected {n * M} rows, found {len(body)}")

        factors = np.empty((M, n, r))
        for row, (line_num, tokens) in enumerate(body):
            if len(tokens) != r:
                raise FileFormatException(f"{self.file_path}:{line_num}: expected {r} values, got {len(tokens)}")
            factors[row // n, row % n] = self._floats(tokens, line_num)

        if not all(is_centered(factor) for factor in factors):
            self.logger.warning("Draws are not centered; subtracting column means")
            factors = factors - factors.mean(axis=1, keepdims=True)

        intercepts = None
        if self.intercepts_path:
            intercepts = InterceptsReader(self.intercepts_path).read()
            if intercepts.shape[0] != M:
                raise FileFormatException(
                    f"{self.intercepts_path}: expected {M} intercepts, found {intercepts.shape[0]}"
                )
        try:
            draws = DrawSet.build(factors, intercepts)
        except InvalidInputException as e:
            raise FileFormatException(f"{self.file_path}: {str(e)}")
        self.logger.info(f"✅ Got {M} draws (n={n}, r={r})")
        return draws


class AdjacencyFileReader(BaseReader):
    """
    Header "n" (optionally "n dense" or "n edges"), then either n rows of n
    0/1 entries or lines "i j" with 0-based indices and i < j.
    """

    def read(self) -> np.ndarray:
        lines = self._data_lines()
        if not lines:
            raise FileFormatException(f"{self.file_path}: empty adjacency file")
        header_num, header = lines[0]
        if len(header) not in (1, 2) or (len(header) == 2 and header[1] not in ("dense", "edges")):
            raise FileFormatException(f"{self.file_path}:{header_num}: header must be 'n' [dense|edges]")
        n = self._ints(header[:1], header_num)[0]
        if n < 2:
            raise FileFormatException(f"{self.file_path}: need at least 2 nodes, got {n}")
        body = lines[1:]

        if len(header) == 2:
            form = header[1]
        else:
            looks_dense = len(body) == n and all(len(tokens) == n for _, tokens in body)
            # a 2-node edge list has at most one body line
            form = "dense" if looks_dense and (n != 2 or len(body) == 2) else "edges"

        A = self._read_dense(body, n) if form == "dense" else self._read_edges(body, n)
        self.logger.info(f"✅ Read {form} adjacency with n={n}, {int(A.sum()) // 2} edges")
        return A

    def _read_dense(self, body, n: int) -> np.ndarray:
        if len(body) != n:
            raise FileFormatException(f"{self.file_path}: expected {n} rows, found {len(body)}")
        A = np.zeros((n, n), dtype=np.int8)
        for row, (line_num, tokens) in enumerate(body):
            if len(tokens) != n:
                raise FileFormatException(f"{self.file_path}:{line_num}: expected {n} entries")
            values = self._ints(tokens, line_num)
            if any(v not in (0, 1) for v in values):
                raise FileFormatException(f"{self.file_path}:{line_num}: entries must be 0 or 1")
            A[row] = values
        if np.any(np.diag(A)):
            raise FileFormatException(f"{self.file_path}: self-loops are not allowed")
        if not np.array_equal(A, A.T):
            raise FileFormatException(f"{self.file_path}: dense adjacency must be symmetric")
        return A

    def _read_edges(self, body, n: int) -> np.ndarray:
        A = np.zeros((n, n), dtype=np.int8)
        for line_num, tokens in body:
            if len(tokens) != 2:
                raise FileFormatException(f"{self.file_path}:{line_num}: expected 'i j'")
            i, j = self._ints(tokens, line_num)
            if i == j:
                raise FileFormatException(f"{self.file_path}:{line_num}: self-loop {i}-{j}")
            if not (0 <= i < n and 0 <= j < n):
                raise FileFormatException(f"{self.file_path}:{line_num}: index out of range [0, {n})")
            if i > j:
                raise FileFormatException(f"{self.file_path}:{line_num}: edges must be written with i < j")
            A[i, j] = A[j, i] = 1
        return A


class MatrixFileReader(BaseReader):
    """Comma-separated matrix with a header row (Gram matrices, factors, templates)."""

    def read(self) -> np.ndarray:
        if not os.path.exists(self.file_path):
            self.logger.error(f"File not found: {self.file_path}")
            raise FileFormatException(f"File not found: {self.file_path}")
        try:
            with open(self.file_path, "r", encoding="utf-8", newline="") as f:
                reader = csv.reader(f)
                header = next(reader, None)
                if not header:
                    raise FileFormatException(f"{self.file_path}: CSV file is empty")
                rows = []
                for row_num, row in enumerate(reader, start=2):
                    if not row:
                        continue
                    if len(row) != len(header):
                        raise FileFormatException(
                            f"{self.file_path}:{row_num}: expected {len(header)} columns, got {len(row)}"
                        )
                    rows.append(self._floats(row, row_num))
        except (OSError, UnicodeDecodeError) as e:
            raise FileFormatException(f"Cannot read {self.file_path}: {str(e)}")
        if not rows:
            raise FileFormatException(f"{self.file_path}: no data rows")
        return np.array(rows)


class TableReader(BaseReader):
    """CSV table with a header row, read as dicts; required columns are checked."""

    def __init__(self, file_path: str, required_fields: Sequence[str] = ()):
        super().__init__(file_path)
        self.required_fields = set(required_fields)

    def read(self) -> List[Dict[str, str]]:
        if not os.path.exists(self.file_path):
            self.logger.error(f"File not found: {self.file_path}")
            raise FileFormatException(f"File not found: {self.file_path}")
        try:
            with open(self.file_path, "r", encoding="utf-8", newline="") as f:
                reader = csv.DictReader(f)
                if not reader.fieldnames:
                    raise FileFormatException(f"{self.file_path}: CSV file is empty")
                missing = self.required_fields - set(reader.fieldnames)
                if missing:
                    raise FileFormatException(f"{self.file_path}: CSV missing required columns: {missing}")
                return [row for row in reader if row and any((v or "").strip() for v in row.values())]
        except (OSError, UnicodeDecodeError, csv.Error) as e:
            raise FileFormatException(f"Cannot read {self.file_path}: {str(e)}")


class LinesReader(BaseReader):
    """One label per line (node names, group labels, dyad pairs)."""

    def read(self) -> List[str]:
        return [" ".join(tokens) for _, tokens in self._data_lines()]


class PairsReader(BaseReader):
    """Lines "i j" naming dyads."""

    def read(self) -> List[Tuple[int, int]]:
        pairs = []
        for line_num, tokens in self._data_lines():
            if len(tokens) != 2:
                raise FileFormatException(f"{self.file_path}:{line_num}: expected 'i j'")
            i, j = self._ints(tokens, line_num)
            pairs.append((i, j))
        return pairs
