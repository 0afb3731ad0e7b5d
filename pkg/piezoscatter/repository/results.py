import csv
import io
import json
import logging
from pathlib import Path
from typing import Iterable, List, Sequence

import numpy as np
import scipy.io
from pydantic import BaseModel

from piezoscatter.core.exceptions import PersistenceError
from piezoscatter.dto.report import SweepRowDTO, TimeseriesRowDTO
from piezoscatter.repository.base import BaseFileRepository, PathLike

logger = logging.getLogger(__name__)

TIMESERIES_COLUMNS = ("t", "probe", "field", "re", "im")
SWEEP_COLUMNS = ("s_re", "s_im", "solution_norm", "rhs_norm", "bound", "ratio")


class ReportRepository(BaseFileRepository[dict]):
    """JSON reports; models are written with their field aliases."""

    def parse(self, text: str) -> dict:
        try:
            return json.loads(text)
        except json.JSONDecodeError as e:
            raise PersistenceError(f"malformed report: {e.msg}", "<report>")

    def format(self, report) -> str:
        if isinstance(report, BaseModel):
            report = report.model_dump(mode="json", by_alias=True)
        return json.dumps(report, indent=2, allow_nan=True) + "\n"


class TimeseriesRepository(BaseFileRepository[List[TimeseriesRowDTO]]):
    """CSV probe time series with columns t, probe, field, re, im."""

    def parse(self, text: str) -> List[TimeseriesRowDTO]:
        reader = csv.DictReader(io.StringIO(text))
        return [TimeseriesRowDTO.model_validate(row) for row in reader]

    def format(self, rows: Iterable[TimeseriesRowDTO]) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(TIMESERIES_COLUMNS)
        for row in rows:
            writer.writerow(
                [repr(row.t), row.probe, row.field, repr(row.re), repr(row.im)]
            )
        return buffer.getvalue()


class SweepRepository(BaseFileRepository[List[SweepRowDTO]]):
    """CSV stability sweep tables."""

    def parse(self, text: str) -> List[SweepRowDTO]:
        rows = []
        for row in csv.DictReader(io.StringIO(text)):
            rows.append(
                SweepRowDTO(
                    s={"re": float(row["s_re"]), "im": float(row["s_im"])},
                    solution_norm=float(row["solution_norm"]),
                    rhs_norm=float(row["rhs_norm"]),
                    bound=float(row["bound"]),
                    ratio=float(row["ratio"]),
                )
            )
        return rows

    def format(self, rows: Sequence[SweepRowDTO]) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for r in rows:
            writer.writerow(
                [r.s.re, r.s.im, r.solution_norm, r.rhs_norm, r.bound, r.ratio]
            )
        return buffer.getvalue()


class ArrayRepository:
    """Binary numpy archives for solution coefficients and density series."""

    def save(self, path: PathLike, **arrays) -> Path:
        target = Path(path)
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            with open(target, "wb") as handle:
                np.savez(handle, **arrays)
        except OSError as e:
            raise PersistenceError(f"cannot write archive: {e.strerror or e}", path)
        return target

    def load(self, path: PathLike) -> dict:
        try:
            with np.load(path, allow_pickle=False) as data:
                return {key: data[key] for key in data.files}
        except (OSError, ValueError) as e:
            raise PersistenceError(f"cannot read archive: {e}", path)


def write_report(report, path: PathLike) -> Path:
    target = ReportRepository().save(report, path)
    logger.info(f"Wrote report {target}")
    return target


def write_timeseries(rows: Iterable[TimeseriesRowDTO], path: PathLike) -> Path:
    target = TimeseriesRepository().save(rows, path)
    logger.info(f"Wrote time series {target}")
    return target


def dump_matrix(matrix, path: PathLike, comment: str = "") -> Path:
    """Write a matrix in MatrixMarket ASCII form."""
    try:
        scipy.io.mmwrite(str(path), matrix, comment=comment)
    except OSError as e:
        raise PersistenceError(f"cannot write matrix: {e.strerror or e}", path)
    target = Path(path)
    if target.suffix != ".mtx" and not target.exists():
        target = target.with_name(target.name + ".mtx")
    logger.info(f"Wrote matrix {target}")
    return target


def write_sweep(rows: Sequence[SweepRowDTO], path: PathLike) -> Path:
    target = SweepRepository().save(rows, path)
    logger.info(f"Wrote sweep table {target}")
    return target
