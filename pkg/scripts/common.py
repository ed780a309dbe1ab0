import functools
import os
from typing import Any, Callable, Dict, Optional

from config.logging_config import logger
from core.errors import BlowUpError, ConfigError, CoverageError, NSStatError, ShapeConstantsError
from core.verify import BoundReport
from utils.helpers import ensure_dir, save_to_json

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_FAIL = 3


def exit_code_for(error: BaseException) -> int:
    """Map an exception to the command-line exit code."""
    if isinstance(error, (BlowUpError, CoverageError, ShapeConstantsError)):
        return EXIT_NUMERICAL
    return EXIT_USAGE


def command(func: Callable[..., int]) -> Callable[..., int]:
    """Run a pipeline command and turn its errors into exit codes."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs) -> int:
        try:
            return func(*args, **kwargs)
        except ConfigError as e:
            fields = f" (fields: {', '.join(e.fields)})" if e.fields else ""
            logger.error(f"{func.__name__}: {str(e)}{fields}")
            return EXIT_USAGE
        except (NSStatError, ValueError, OSError) as e:
            code = exit_code_for(e)
            logger.error(f"{func.__name__} failed with exit code {code}: {str(e)}")
            return code
    return wrapper


def output_path(output_dir: str, name: str, suffix: str) -> str:
    return os.path.join(ensure_dir(output_dir), f"{name}{suffix}")


def stem(path: str) -> str:
    """File name without directory and extension, used to name derived outputs."""
    return os.path.splitext(os.path.basename(path))[0]


def require_file(path: Optional[str], what: str) -> str:
    if not path or not os.path.exists(path):
        raise ConfigError(f"{what} not found: {path}")
    return path


def write_report(data: Dict[str, Any], path: str) -> None:
    if not save_to_json(data, path):
        raise OSError(f"could not write {path}")
    logger.info(f"Wrote report {path}")


def reports_to_dict(reports: Dict[str, BoundReport]) -> Dict[str, Any]:
    return {name: report.to_dict() for name, report in reports.items()}
