import hashlib
import json
import logging
import os
import re
import time
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import date
from typing import Dict, List, Optional, Sequence

from models.errors import CatalogError, TrendsCSVParseError
from models.series import SamplePool, SampleSeries, TermQuery
from preprocessing.file_parser import parse_trends_csv, read_txt, serialize_trends_csv
from preprocessing.normalization import assert_series_valid

logger = logging.getLogger(__name__)

INDEX_FILE = "index.json"
LOCK_FILE = "index.lock"
INDEX_VERSION = 1

_FILE_STEM = re.compile(r"^(\d{4}-\d{2}-\d{2})(?:-([0-9a-f]{8}))?$")


def content_checksum(text: str) -> str:
    """64-bit content hash (first 16 hex digits of SHA-256)."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class CatalogEntry:
    query: TermQuery
    download_date: date
    file_path: str
    checksum: str

    def sort_key(self):
        q = self.query
        return (q.geo, q.term, q.start, q.end, q.frequency, self.download_date, self.checksum)

    def to_dict(self) -> Dict[str, str]:
        q = self.query
        return {
            "term": q.term,
            "geo": q.geo,
            "start": q.start.isoformat(),
            "end": q.end.isoformat(),
            "frequency": q.frequency,
            "download_date": self.download_date.isoformat(),
            "file_path": self.file_path,
            "checksum": self.checksum,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, str]) -> "CatalogEntry":
        query = TermQuery(
            term=data["term"],
            geo=data["geo"],
            start=date.fromisoformat(data["start"]),
            end=date.fromisoformat(data["end"]),
            frequency=data["frequency"],
        )
        return cls(query=query, download_date=date.fromisoformat(data["download_date"]),
                   file_path=data["file_path"], checksum=data["checksum"])


class Catalog:
    """
    On-disk store of downloaded samples:

        <root>/<geo>/<term-slug>/<download_date>.csv
        <root>/index.json

    Files are kept in canonical export form so checksums do not depend on
    how a file was downloaded. Writers take an advisory lock file and
    replace the index atomically.
    """

    def __init__(self, root: str, lock_timeout: float = 30.0, stale_lock_after: float = 600.0):
        if not os.path.exists(root):
            os.makedirs(root, exist_ok=True)
        self.root = root
        self.lock_timeout = lock_timeout
        self.stale_lock_after = stale_lock_after
        self.entries: List[CatalogEntry] = self._read_index()

    @classmethod
    def open(cls, root: str) -> "Catalog":
        if not os.path.exists(os.path.join(root, INDEX_FILE)):
            raise CatalogError(f"no catalog index found under {root}")
        return cls(root)

    # ---------- index handling ----------

    def _index_path(self) -> str:
        return os.path.join(self.root, INDEX_FILE)

    def _read_index(self) -> List[CatalogEntry]:
        path = self._index_path()
        if not os.path.exists(path):
            return []
        try:
            with open(path, "r", encoding="utf-8") as f:
                payload = json.load(f)
            return [CatalogEntry.from_dict(item) for item in payload["entries"]]
        except (ValueError, KeyError) as e:
            raise CatalogError(f"corrupt catalog index {path}: {e}") from None

    def _write_index(self, entries: List[CatalogEntry]):
        payload = {"version": INDEX_VERSION, "entries": [e.to_dict() for e in entries]}
        _atomic_write(self._index_path(), json.dumps(payload, indent=2, ensure_ascii=False) + "\n")

    @contextmanager
    def _locked(self):
        path = os.path.join(self.root, LOCK_FILE)
        deadline = time.monotonic() + self.lock_timeout
        while True:
            try:
                fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
                os.write(fd, str(os.getpid()).encode("ascii"))
                os.close(fd)
                break
            except FileExistsError:
                try:
                    age = time.time() - os.path.getmtime(path)
                except FileNotFoundError:
                    continue
                if age > self.stale_lock_after:
                    logger.warning(f"[Catalog] Removing stale lock file {path}")
                    _remove_quietly(path)
                    continue
                if time.monotonic() > deadline:
                    raise CatalogError(f"catalog {self.root} is locked by another writer")
                time.sleep(0.05)
        try:
            yield
        finally:
            _remove_quietly(path)

    # ---------- writes ----------

    def find(self, query: TermQuery, download_date: date, checksum: str) -> Optional[CatalogEntry]:
        for entry in self.entries:
            if entry.query == query and entry.download_date == download_date and entry.checksum == checksum:
                return entry
        return None

    def add(self, series: SampleSeries, download_date: date) -> CatalogEntry:
        """Store one series; adding identical content for the same query and date is a no-op."""
        assert_series_valid(series)
        text = serialize_trends_csv(series)
        checksum = content_checksum(text)
        query = series.query

        with self._locked():
            self.entries = self._read_index()
            existing = self.find(query, download_date, checksum)
            if existing is not None:
                logger.warning(
                    f"[Catalog] Duplicate sample for {query.term!r} ({query.geo}) on {download_date}: skipped"
                )
                return existing

            rel_dir = os.path.join(query.geo, query.slug)
            rel_path = os.path.join(rel_dir, f"{download_date.isoformat()}.csv")
            if os.path.exists(os.path.join(self.root, rel_path)):
                rel_path = os.path.join(rel_dir, f"{download_date.isoformat()}-{checksum[:8]}.csv")
            os.makedirs(os.path.join(self.root, rel_dir), exist_ok=True)
            try:
                _atomic_write(os.path.join(self.root, rel_path), text)
            except OSError as e:
                raise CatalogError(f"could not write {rel_path}: {e}") from None

            entry = CatalogEntry(query=query, download_date=download_date,
                                 file_path=rel_path.replace(os.sep, "/"), checksum=checksum)
            entries = sorted(self.entries + [entry], key=CatalogEntry.sort_key)
            self._write_index(entries)
            self.entries = entries

        logger.info(f"[Catalog] Added {entry.file_path}")
        return entry

    def rebuild(self, write: bool = False) -> List[CatalogEntry]:
        """Recreate the entry list by scanning the directory tree."""
        entries = []
        for dirpath, _dirnames, filenames in os.walk(self.root):
            for filename in filenames:
                if not filename.endswith(".csv"):
                    continue
                match = _FILE_STEM.match(filename[:-4])
                if not match:
                    logger.warning(f"[Catalog] Ignoring unexpected file {filename}")
                    continue
                full_path = os.path.join(dirpath, filename)
                text = read_txt(full_path)
                download_date = date.fromisoformat(match.group(1))
                try:
                    series = parse_trends_csv(text, download_date=download_date)
                except TrendsCSVParseError as e:
                    raise CatalogError(f"{full_path}: {e}") from None
                rel_path = os.path.relpath(full_path, self.root).replace(os.sep, "/")
                entries.append(CatalogEntry(query=series.query, download_date=download_date,
                                            file_path=rel_path, checksum=content_checksum(text)))
        entries.sort(key=CatalogEntry.sort_key)
        if write:
            with self._locked():
                self._write_index(entries)
                self.entries = entries
        return entries

    def verify(self):
        """Raise CatalogError if any indexed file is missing or altered."""
        for entry in self.entries:
            self._read_entry_text(entry)

    # ---------- reads ----------

    def _read_entry_text(self, entry: CatalogEntry) -> str:
        path = os.path.join(self.root, entry.file_path)
        if not os.path.exists(path):
            raise CatalogError(f"indexed file {entry.file_path} is missing")
        text = read_txt(path)
        if content_checksum(text) != entry.checksum:
            raise CatalogError(f"checksum mismatch for {entry.file_path}")
        return text

    def load(self, entry: CatalogEntry, sample_id: Optional[str] = None) -> SampleSeries:
        text = self._read_entry_text(entry)
        return parse_trends_csv(text, download_date=entry.download_date,
                                sample_id=sample_id or entry.download_date.isoformat())

    def queries(self, geo: Optional[str] = None) -> List[TermQuery]:
        seen = []
        for entry in self.entries:
            if (geo is None or entry.query.geo == geo) and entry.query not in seen:
                seen.append(entry.query)
        return seen

    def geos(self) -> List[str]:
        return sorted({entry.query.geo for entry in self.entries})

    def load_pool(self, query_set: Sequence[TermQuery]) -> SamplePool:
        """
        Align every query's samples by download date into one pool.

        Each query must have been downloaded on the same dates (same number
        of times per date).
        """
        query_set = list(query_set)
        if not query_set:
            raise CatalogError("query set is empty")
        grids = {(q.geo, q.start, q.end, q.frequency) for q in query_set}
        if len(grids) != 1:
            raise CatalogError("grid mismatch: pooled queries must share geo, window and frequency")

        per_query = []
        for query in query_set:
            entries = sorted((e for e in self.entries if e.query == query),
                             key=lambda e: (e.download_date, e.checksum))
            if not entries:
                raise CatalogError(f"no samples stored for {query.term!r} ({query.geo})")
            per_query.append(entries)

        date_lists = [[e.download_date for e in entries] for entries in per_query]
        all_dates = sorted({d for dates in date_lists for d in dates})
        problems = []
        for query, dates in zip(query_set, date_lists):
            missing = [d.isoformat() for d in all_dates if dates.count(d) < max(dl.count(d) for dl in date_lists)]
            if missing:
                problems.append(f"{query.term!r} missing {', '.join(missing)}")
        if problems:
            raise CatalogError("unequal sample counts across terms: " + "; ".join(problems))

        labels = _sample_labels(date_lists[0])
        rows = []
        for k, label in enumerate(labels):
            rows.append([self.load(entries[k], sample_id=label) for entries in per_query])
        logger.info(f"[Catalog] Loaded pool S={len(rows)} P={len(query_set)}")
        return SamplePool(query_set, rows)


def _sample_labels(dates: List[date]) -> List[str]:
    labels = []
    for k, d in enumerate(dates):
        repeat = dates[:k].count(d)
        labels.append(d.isoformat() if repeat == 0 else f"{d.isoformat()}#{repeat}")
    return labels


def _atomic_write(path: str, text: str):
    tmp_path = path + ".tmp"
    with open(tmp_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    os.replace(tmp_path, path)


def _remove_quietly(path: str):
    try:
        os.remove(path)
    except FileNotFoundError:
        pass


def catalog_add(catalog: Catalog, series: SampleSeries, download_date: date) -> CatalogEntry:
    return catalog.add(series, download_date)


def load_pool(catalog: Catalog, query_set: Sequence[TermQuery]) -> SamplePool:
    return catalog.load_pool(query_set)
