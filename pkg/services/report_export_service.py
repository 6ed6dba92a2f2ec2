"""
CSV output. Every table goes through `write_frame`, which writes LF-only
text with a fixed float format and replaces the target atomically, so two
runs with the same inputs produce byte-identical files.
"""

import logging
import os
from typing import List

import pandas as pd

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.8g"


class ReportExportService:

    def __init__(self, out_dir: str):
        os.makedirs(out_dir, exist_ok=True)
        self.out_dir = out_dir
        self.written: List[str] = []

    def path(self, filename: str) -> str:
        return os.path.join(self.out_dir, filename)

    def write_frame(self, frame: pd.DataFrame, filename: str, index: bool = False) -> str:
        target = write_frame(frame, self.path(filename), index=index)
        if filename not in self.written:
            self.written.append(filename)
        return target


def write_frame(frame: pd.DataFrame, path: str, index: bool = False, float_format: str = FLOAT_FORMAT) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    tmp_path = path + ".tmp"
    frame.to_csv(tmp_path, index=index, float_format=float_format, lineterminator="\n")
    os.replace(tmp_path, path)
    logger.info(f"[Report] Wrote {path}")
    return path
