import logging
import logging.config
from typing import Any, Dict

import numpy as np
from pythonjsonlogger import jsonlogger

from hybridqf import __version__
from hybridqf.settings import Settings

_FORMAT = "%(asctime)s %(levelname)s %(name)s %(message)s"
_RENAMES = {"asctime": "timestamp", "levelname": "level"}


def _json_default(value: Any) -> Any:
    """Serialize numpy scalars and arrays passed through ``extra``."""

    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        if np.iscomplexobj(value):
            return {"re": value.real.tolist(), "im": value.imag.tolist()}
        return value.tolist()
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    return str(value)


def configure_logging(settings: Settings) -> None:
    """Configure JSON structured logging on stderr."""

    handler: Dict[str, Any] = {
        "class": "logging.StreamHandler",
        "level": settings.log_level.upper(),
        "formatter": "json",
        "stream": "ext://sys.stderr",
    }

    logging.config.dictConfig(
        {
            "version": 1,
            "disable_existing_loggers": False,
            "formatters": {
                "json": {
                    "()": jsonlogger.JsonFormatter,
                    "fmt": _FORMAT,
                    "rename_fields": _RENAMES,
                    "static_fields": {"version": __version__},
                    "json_default": _json_default,
                }
            },
            "handlers": {"default": handler},
            "root": {"handlers": ["default"], "level": settings.log_level.upper()},
        }
    )

    logging.getLogger(__name__).debug("Logging configured", extra={"log_level": settings.log_level})
