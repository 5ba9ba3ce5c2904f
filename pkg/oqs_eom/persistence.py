"""
oqs_eom/persistence.py
Writing and reading result records and flat tabular exports.
"""

from pathlib import Path
from typing import List, Optional, Sequence, TextIO
import csv
import io
import logging
import os
import sys
import tempfile

import numpy as np

from oqs_eom.schemas import ResultRecord, decode_matrix

logger = logging.getLogger(__name__)


class Table:
    """One row per time or frequency point; complex cells are split into .re/.im columns"""

    def __init__(self, columns: Sequence[str]):
        self.columns = list(columns)
        self.rows: List[list] = []

    def add_row(self, *cells):
        if len(cells) != len(self.columns):
            raise ValueError(f"row has {len(cells)} cells for {len(self.columns)} columns")
        self.rows.append(list(cells))

    def header(self) -> List[str]:
        names = []
        for name, cell in zip(self.columns, self.rows[0] if self.rows else [0.0] * len(self.columns)):
            if np.iscomplexobj(cell):
                names.extend([f"{name}.re", f"{name}.im"])
            else:
                names.append(name)
        return names

    def flat_rows(self) -> List[list]:
        out = []
        for row in self.rows:
            flat = []
            for cell in row:
                if np.iscomplexobj(cell):
                    flat.extend([repr(float(np.real(cell))), repr(float(np.imag(cell)))])
                else:
                    flat.append(repr(float(cell)) if isinstance(cell, (float, np.floating)) else str(cell))
            out.append(flat)
        return out

    def write(self, stream: TextIO):
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(self.header())
        writer.writerows(self.flat_rows())

    def to_csv(self) -> str:
        buffer = io.StringIO()
        self.write(buffer)
        return buffer.getvalue()


def matrix_columns(prefix: str, d: int) -> List[str]:
    return [f"{prefix}[{i}{j}]" for i in range(d) for j in range(d)]


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def write_output(text: str, out: Optional[str]):
    """Write to `out` atomically, or to stdout when no path is given"""
    if out is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
        return
    _atomic_write(Path(out), text)
    logger.info(f"✅ Wrote {out}")


def save_record(record: ResultRecord, out: Optional[str]):
    write_output(record.to_json(), out)


def save_table(table: Table, out: Optional[str]):
    write_output(table.to_csv(), out)


def load_record(path: str) -> ResultRecord:
    return ResultRecord.from_json(Path(path).read_text(encoding="utf-8"))


def payload_matrix(record: ResultRecord, key: str) -> np.ndarray:
    """Decode a matrix (or a stack of matrices) stored in the record payload"""
    arr = np.asarray(record.payload[key], dtype=float)
    if arr.ndim == 3:
        return decode_matrix(arr)
    return arr[..., 0] + 1j * arr[..., 1]
