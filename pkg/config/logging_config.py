import logging
import os
from datetime import datetime
from typing import Optional

from config.settings import LOG_DIR, LOG_LEVEL

logger = logging.getLogger("nsstat")


# Configure logging
def setup_logging(log_dir: Optional[str] = None, level: Optional[str] = None) -> logging.Logger:
    log_dir = log_dir or os.getenv("NSSTAT_LOG_DIR", LOG_DIR)
    os.makedirs(log_dir, exist_ok=True)
    log_filename = os.path.join(log_dir, f"nsstat_{datetime.now().strftime('%Y%m%d')}.log")

    logging.basicConfig(
        level=getattr(logging, (level or LOG_LEVEL).upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[
            logging.FileHandler(log_filename),
            logging.StreamHandler()
        ]
    )

    # numerical libraries are chatty at DEBUG
    logging.getLogger("matplotlib").setLevel(logging.WARNING)
    logging.getLogger("hypothesis").setLevel(logging.WARNING)

    return logger
