import logging
import sys
from typing import Optional
from src.core.config import settings

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

# fpdf2 pulls in fontTools, which is chatty at INFO
QUIET_LIBRARIES = ("fontTools", "fpdf")


def setup_logging(level: Optional[str] = None):
    """Configure the root logger once per process; `level` overrides settings.LOG_LEVEL."""
    name = (level or settings.LOG_LEVEL).upper()
    logging.basicConfig(
        level=getattr(logging, name, logging.INFO),
        format=LOG_FORMAT,
        handlers=[logging.StreamHandler(sys.stdout)],
        force=level is not None,
    )
    for lib in QUIET_LIBRARIES:
        logging.getLogger(lib).setLevel(logging.WARNING)


setup_logging()
logger = logging.getLogger("LagFlow")
