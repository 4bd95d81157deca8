"""
Package logger. Level INFO by default, can be changed to DEBUG if the cli is ran with --debug option.
"""

import logging

import colorlog


class CustomFormatter(colorlog.ColoredFormatter):

    FORMAT = "%(log_color)s%(asctime)s    %(name)s    %(levelname)s    %(message)s (%(filename)s:%(lineno)d)%(reset)s"

    COLORS = {
        'DEBUG': 'cyan',
        'INFO': 'white',
        'WARNING': 'yellow',
        'ERROR': 'red',
        'CRITICAL': 'bold_red',
    }

    def __init__(self):
        super().__init__(self.FORMAT, datefmt='%Y-%m-%d %I:%M:%S', log_colors=self.COLORS)


def set_log_level(level) -> None:
    """
    :param level:   A logging level name (e.g. "DEBUG") or number
    """
    if isinstance(level, str):
        level = level.upper()
    logger.setLevel(level)


logger = logging.getLogger("cam2traj")
logger.setLevel(logging.INFO)
if not logger.handlers:
    ch = logging.StreamHandler()
    ch.setFormatter(CustomFormatter())
    logger.addHandler(ch)

logger.debug("-------------------------------   Loaded cam2traj Logger    -------------------------------")
