""" Serialization of observable series, comparison summaries and sampling matrices to CSV and JSON """
from __future__ import annotations
import json, logging, math, os
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence
import aiofiles
import numpy as np
from src.config.enums import OutputFormat
from src.models.series import COLUMNS, ComparisonResult, ObservableSeries

logger = logging.getLogger(__name__)


def jsonable(value: Any) -> Any:
    """Convert numpy containers and scalars (recursively) into JSON-ready values."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (np.integer, np.bool_)):
        return value.item()
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    return value


@dataclass
class FormatConfig:
    """Centralized formatting configuration"""
    significant_digits: int = 17
    comment_prefix: str = "# "
    delimiter: str = ","


class Formatters:
    """Plot-ready text renderers; identical inputs give byte-identical output"""

    config = FormatConfig()

    @classmethod
    def number(cls, value: float) -> str:
        return f"{float(value):.{cls.config.significant_digits}g}"

    @classmethod
    def _comments(cls, metadata: Dict[str, Any]) -> List[str]:
        return [f"{cls.config.comment_prefix}{key}={json.dumps(jsonable(metadata[key]))}" for key in sorted(metadata)]

    @classmethod
    def series_csv(cls, series: ObservableSeries) -> str:
        """'#' metadata lines, then the fixed column header and one row per time."""
        lines = cls._comments({**series.fingerprint, "method": series.method.value})
        lines += [f"{cls.config.comment_prefix}warning={json.dumps(w)}" for w in series.warnings]
        columns = series.columns()
        lines.append(cls.config.delimiter.join(COLUMNS))
        data = np.column_stack([columns[name] for name in COLUMNS])
        lines += [cls.config.delimiter.join(cls.number(x) for x in row) for row in data]
        return "\n".join(lines) + "\n"

    @classmethod
    def series_json(cls, series: ObservableSeries) -> str:
        document = {
            "method": series.method.value,
            "fingerprint": jsonable(series.fingerprint),
            "warnings": list(series.warnings),
            "diagnostics": jsonable({k: v for k, v in series.diagnostics.items() if k != "singular_terms"}),
            "columns": {name: [float(x) for x in values] for name, values in series.columns().items()},
        }
        return json.dumps(document, indent=2, sort_keys=False) + "\n"

    @classmethod
    def series(cls, series: ObservableSeries, fmt: OutputFormat) -> str:
        return cls.series_csv(series) if fmt is OutputFormat.CSV else cls.series_json(series)

    @classmethod
    def summary(cls, results: Sequence[ComparisonResult], fmt: OutputFormat,
                metadata: Optional[Dict[str, Any]] = None, threshold: float = 0.05) -> str:
        """Comparison rows against the exact reference, closest first."""
        ordered = sorted(results, key=lambda r: (r.sup_norm, r.label))
        if fmt is OutputFormat.JSON:
            rows = [{**r.model_dump(), "agrees": r.agrees(threshold)} for r in ordered]
            return json.dumps({"metadata": jsonable(metadata or {}), "threshold": threshold, "comparisons": rows}, indent=2) + "\n"
        lines = cls._comments({**(metadata or {}), "threshold": threshold})
        lines.append("label,sup_norm,rms,first_divergence_time,agrees")
        for r in ordered:
            divergence = "" if r.first_divergence_time is None else cls.number(r.first_divergence_time)
            lines.append(f"{r.label},{cls.number(r.sup_norm)},{cls.number(r.rms)},{divergence},{str(r.agrees(threshold)).lower()}")
        return "\n".join(lines) + "\n"

    @classmethod
    def matrix(cls, matrix: np.ndarray, fmt: OutputFormat, metadata: Optional[Dict[str, Any]] = None) -> str:
        if fmt is OutputFormat.JSON:
            return json.dumps({"metadata": jsonable(metadata or {}), "matrix": jsonable(matrix)}, indent=2) + "\n"
        lines = cls._comments(metadata or {})
        lines += [cls.config.delimiter.join(cls.number(x) for x in row) for row in np.atleast_2d(matrix)]
        return "\n".join(lines) + "\n"


async def write_text(path: str, text: str) -> str:
    """Write text with aiofiles, creating missing parent directories."""
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    async with aiofiles.open(path, "w", encoding="utf-8", newline="\n") as f:
        await f.write(text)
    logger.info(f"Wrote {path}")
    return path
