from .file_parser import parse_trends_csv, read_file, read_target_csv, read_trends_csv, read_txt, serialize_trends_csv
from .normalization import assert_series_valid, normalize
from .smoothing import trend_smooth

__all__ = [
    "assert_series_valid",
    "normalize",
    "parse_trends_csv",
    "read_file",
    "read_target_csv",
    "read_trends_csv",
    "read_txt",
    "serialize_trends_csv",
    "trend_smooth",
]
