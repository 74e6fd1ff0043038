"""
Вывод результатов: CSV (заголовок, точка как разделитель, 12 значащих цифр)
и JSON рядом с ним (те же строки плюс метаданные и версия).
"""
import csv
import json
import logging
from pathlib import Path
from typing import Iterable, Sequence

from dfsim import __version__
from dfsim.fock import POLARIZATION_BASIS, PolarizationDensityMatrix


logger = logging.getLogger("dfsim")

# Версия схемы CSV/JSON; меняется при изменении набора колонок
SCHEMA_VERSION = 1


def format_value(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.11e}"
    return str(value)


def write_csv(path: str | Path, rows: Iterable[dict], columns: Sequence[str]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row[c]) for c in columns])


def write_json(path: str | Path, payload: dict) -> None:
    document = {"schema_version": SCHEMA_VERSION, "version": __version__, **payload}
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(document, handle, sort_keys=True, indent=2, default=str)
        handle.write("\n")


def json_path_for(path: str | Path) -> Path:
    """results.csv -> results.json; если out уже .json, CSV не пишется."""
    return Path(path).with_suffix(".json")


def write_results(path: str | Path, rows: list[dict], columns: Sequence[str], metadata: dict | None = None) -> list[Path]:
    """
    Таблица в CSV по пути out и JSON с тем же именем.
    Возвращает список записанных файлов.
    """
    path = Path(path)
    written = []
    if path.suffix != ".json":
        write_csv(path, rows, columns)
        written.append(path)

    target = json_path_for(path)
    write_json(target, {"columns": list(columns), "rows": rows, "metadata": metadata or {}})
    written.append(target)

    logger.info("Wrote %s", ", ".join(str(p) for p in written))
    return written


DENSITY_COLUMNS = ("state", "row", "col", "re", "im")


def density_rows(dm: PolarizationDensityMatrix, state: str) -> list[dict]:
    """Матрица плотности построчно: по строке на элемент (ket, bra)."""
    return [
        {"state": state, "row": r, "col": c, "re": dm.element(r, c).real, "im": dm.element(r, c).imag}
        for r in POLARIZATION_BASIS
        for c in POLARIZATION_BASIS
    ]
