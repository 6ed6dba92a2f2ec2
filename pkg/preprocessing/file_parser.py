"""
Readers and writers for the file formats the package consumes:
Google Trends CSV exports and two-column nowcast target files.
"""

import os
import re
from datetime import date
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from models.errors import SeriesValidationError, TrendsCSVParseError
from models.series import DAILY, MONTHLY, SampleSeries, TermQuery, TimeGrid, format_period, parse_period

LOW_VOLUME_TOKEN = "<1"
LOW_VOLUME_VALUE = 0.5
DEFAULT_CATEGORY = "All categories"

_HEADER = re.compile(r"^(Month|Day),(.+): \(([^()]+)\)$")
_INTEGER = re.compile(r"^\d+$")
_FREQUENCY_BY_LABEL = {"Month": MONTHLY, "Day": DAILY}
_LABEL_BY_FREQUENCY = {MONTHLY: "Month", DAILY: "Day"}


def read_txt(file_path: str) -> str:
    # utf-8-sig drops a BOM if the export has one
    try:
        with open(file_path, "r", encoding="utf-8-sig", newline="") as f:
            return f.read()
    except UnicodeDecodeError as e:
        raise TrendsCSVParseError(f"{file_path} is not UTF-8 text (byte offset {e.start})", 1) from None
    except OSError as e:
        raise TrendsCSVParseError(f"cannot read {file_path}: {e.strerror or e}", 1) from None


def parse_trends_csv(text: str, download_date: Optional[date] = None,
                     sample_id: Optional[str] = None) -> SampleSeries:
    """
    Parse a Trends export:

        Category: <name>
        <blank>
        Month,<term>: (<geo>)        (or Day,...)
        YYYY-MM,<value>              (value is 0-100 or the literal <1)

    `<1` is read as 0.5 and flagged in the series' low_volume mask.
    """
    if text.startswith("\ufeff"):
        text = text[1:]
    lines = text.replace("\r\n", "\n").split("\n")
    while lines and lines[-1].strip() == "":
        lines.pop()

    if not lines or not re.match(r"^Category: \S", lines[0]):
        raise TrendsCSVParseError("expected 'Category: <name>' header", 1)
    if len(lines) < 2 or lines[1].strip() != "":
        raise TrendsCSVParseError("expected a blank line after the category header", 2)
    if len(lines) < 3:
        raise TrendsCSVParseError("missing column header", 3)
    match = _HEADER.match(lines[2].strip())
    if not match:
        raise TrendsCSVParseError(
            f"malformed column header {lines[2]!r}, expected 'Month,<term>: (<geo>)'", 3
        )
    frequency = _FREQUENCY_BY_LABEL[match.group(1)]
    term, geo = match.group(2).strip(), match.group(3).strip()

    periods: List[date] = []
    values: List[float] = []
    low_volume: List[bool] = []
    for line_no, line in enumerate(lines[3:], start=4):
        parts = line.strip().split(",")
        if len(parts) != 2:
            raise TrendsCSVParseError(f"expected '<period>,<value>', got {line!r}", line_no)
        period_text, value_text = parts[0].strip(), parts[1].strip()
        try:
            periods.append(parse_period(period_text, frequency))
        except ValueError as e:
            raise TrendsCSVParseError(str(e), line_no) from None
        if value_text == LOW_VOLUME_TOKEN:
            values.append(LOW_VOLUME_VALUE)
            low_volume.append(True)
            continue
        if not _INTEGER.match(value_text) or int(value_text) > 100:
            raise TrendsCSVParseError(f"value {value_text!r} is not an integer in [0, 100] or '<1'", line_no)
        values.append(float(value_text))
        low_volume.append(False)

    if len(periods) < 2:
        raise TrendsCSVParseError("an export needs at least 2 data rows", len(lines) + 1)
    try:
        grid = TimeGrid(tuple(periods), frequency)
    except SeriesValidationError as e:
        offset = e.period_index if e.period_index is not None else 0
        raise TrendsCSVParseError(f"non-contiguous periods: {e}", 4 + offset) from None

    query = TermQuery(term=term, geo=geo, start=grid.start, end=grid.end, frequency=frequency)
    if sample_id is None:
        sample_id = download_date.isoformat() if download_date else "sample"
    return SampleSeries(query=query, values=np.array(values), download_date=download_date,
                        sample_id=sample_id, low_volume=np.array(low_volume))


def serialize_trends_csv(series: SampleSeries, category: str = DEFAULT_CATEGORY) -> str:
    """Canonical export text: UTF-8, LF line endings, no BOM."""
    query = series.query
    lines = [
        f"Category: {category}",
        "",
        f"{_LABEL_BY_FREQUENCY[query.frequency]},{query.term}: ({query.geo})",
    ]
    for i, (period, value, flagged) in enumerate(zip(series.grid.periods, series.values, series.low_volume)):
        if flagged:
            cell = LOW_VOLUME_TOKEN
        elif float(value).is_integer():
            cell = str(int(value))
        else:
            raise SeriesValidationError(f"value {value:g} is not an integer index", i)
        lines.append(f"{format_period(period, query.frequency)},{cell}")
    return "\n".join(lines) + "\n"


def read_trends_csv(file_path: str, download_date: Optional[date] = None,
                    sample_id: Optional[str] = None) -> SampleSeries:
    return parse_trends_csv(read_txt(file_path), download_date=download_date, sample_id=sample_id)


def read_target_csv(file_path: str) -> Tuple[TimeGrid, np.ndarray]:
    """Read a `period,value` target file; the period format decides the frequency."""
    try:
        df = pd.read_csv(file_path, dtype={"period": str}, encoding="utf-8-sig")
    except pd.errors.EmptyDataError:
        raise TrendsCSVParseError(f"{file_path} is empty", 1) from None
    except pd.errors.ParserError as e:
        raise TrendsCSVParseError(f"{file_path} is not a valid CSV file: {e}", 1) from None
    except UnicodeDecodeError as e:
        raise TrendsCSVParseError(f"{file_path} is not UTF-8 text (byte offset {e.start})", 1) from None
    except OSError as e:
        raise TrendsCSVParseError(f"cannot read {file_path}: {e.strerror or e}", 1) from None
    if list(df.columns) != ["period", "value"]:
        raise TrendsCSVParseError(f"expected header 'period,value', got {','.join(map(str, df.columns))}", 1)
    if df.empty:
        raise TrendsCSVParseError("target file has no rows", 2)
    df["period"] = df["period"].fillna("")
    frequency = MONTHLY if len(df["period"].iloc[0].strip()) == 7 else DAILY
    periods = []
    for row_no, text in enumerate(df["period"], start=2):
        try:
            periods.append(parse_period(text, frequency))
        except ValueError as e:
            raise TrendsCSVParseError(str(e), row_no) from None
    values = pd.to_numeric(df["value"], errors="coerce").to_numpy(dtype=float)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise TrendsCSVParseError("target value is not a number", int(bad[0]) + 2)
    try:
        grid = TimeGrid(tuple(periods), frequency)
    except SeriesValidationError as e:
        raise TrendsCSVParseError(f"target periods: {e}", 2 + (e.period_index or 0)) from None
    return grid, values


def read_file(file_path: str, **kwargs) -> SampleSeries:
    ext = os.path.splitext(file_path)[1].lower()
    if ext == ".csv":
        return read_trends_csv(file_path, **kwargs)
    raise TrendsCSVParseError(f"unsupported file type {ext or '(none)'}", 1)
