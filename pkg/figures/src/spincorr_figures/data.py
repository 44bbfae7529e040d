"""CSV loading with strict schema validation.

Only the two documented spincorr headers are accepted; anything else is a
schema error. Values are parsed as floats (nan marks inapplicable
fields).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BASE_COLUMNS = ("n", "seed", "re_C", "im_C", "re_Cn", "im_Cn", "eps_sys_rel",
                "eps_stat_rel", "eps_tot_rel", "measured_rel")
HEADER_1D = ("lambda",) + BASE_COLUMNS
HEADER_2D = ("lambda", "lambda2") + BASE_COLUMNS


class SchemaError(ValueError):
    """The file does not carry the documented CSV schema."""


@dataclass
class Table:
    columns: tuple[str, ...]
    data: dict[str, np.ndarray]
    path: str

    @property
    def has_lambda2(self) -> bool:
        return "lambda2" in self.columns

    def __len__(self) -> int:
        return len(next(iter(self.data.values())))

    def col(self, name: str) -> np.ndarray:
        return self.data[name]


def load_table(path: str) -> Table:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [line.strip() for line in fh if line.strip()]
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from None
    if not lines:
        raise SchemaError(f"{path} is empty")
    header = tuple(lines[0].split(","))
    if header not in (HEADER_1D, HEADER_2D):
        raise SchemaError(
            f"{path} header does not match the documented schema: "
            f"{lines[0]!r}")
    rows = lines[1:]
    if not rows:
        raise SchemaError(f"{path} has a valid header but no data rows")
    values = np.empty((len(rows), len(header)))
    for i, row in enumerate(rows):
        parts = row.split(",")
        if len(parts) != len(header):
            raise SchemaError(f"{path} row {i + 2} has {len(parts)} fields, "
                              f"expected {len(header)}")
        try:
            values[i] = [float(p) for p in parts]
        except ValueError as exc:
            raise SchemaError(f"{path} row {i + 2}: {exc}") from None
    data = {name: values[:, k] for k, name in enumerate(header)}
    return Table(header, data, path)
