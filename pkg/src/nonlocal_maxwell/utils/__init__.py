"""
Utility functions for nonlocal_maxwell.

This package provides common utilities:
- Common Python helpers (exists, default, compact, parse_number_list)
- Logging setup
- JSON report and CSV sweep serialization
"""

from .common import compact, default, exists, parse_number_list
from .logger import set_package_level, setup_logger
from .reports import dumps_report, read_csv, to_jsonable, write_csv, write_report

__all__ = [
    # Common helpers
    "exists",
    "default",
    "compact",
    "parse_number_list",
    # Logging
    "setup_logger",
    "set_package_level",
    # Reports
    "to_jsonable",
    "dumps_report",
    "write_report",
    "write_csv",
    "read_csv",
]
