"""Console logging for routh-dirac runs."""

import logging
import sys

LOG_FORMAT = "%(asctime)s.%(msecs)03d %(levelname)-7s [%(name)s] %(message)s"
DATE_FORMAT = "%H:%M:%S"
HANDLER_NAME = "routh_dirac.console"

# RankDeficientWarning and friends arrive on py.warnings once captured
LOGGER_NAMES = ("routh_dirac", "py.warnings")


def setup_logging(verbose: bool = False) -> logging.Logger:
    """Attach one stderr handler to the package and warnings loggers.

    Safe to call repeatedly: a handler installed by an earlier call is
    replaced. Records still propagate to the root logger.
    """
    level = logging.DEBUG if verbose else logging.INFO
    handler = logging.StreamHandler(sys.stderr)
    handler.set_name(HANDLER_NAME)
    handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT))

    logging.captureWarnings(True)
    for name in LOGGER_NAMES:
        logger = logging.getLogger(name)
        for old in [h for h in logger.handlers if h.get_name() == HANDLER_NAME]:
            logger.removeHandler(old)
        logger.addHandler(handler)
        logger.setLevel(level)

    return logging.getLogger("routh_dirac")
