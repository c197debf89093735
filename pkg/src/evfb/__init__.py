"""Event-camera denoising toolkit for sparse space-imaging scenes."""
import logging
import os

from .evstream import EventStream, Label, read_stream, write_stream

__version__ = "0.1.0"

_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def configure_logging(level=None) -> None:
    """Root logging from the EVFB_LOG variable (error, warn, info, debug); default warn."""
    name = (level or os.environ.get("EVFB_LOG", "warn")).lower()
    logging.basicConfig(level=_LEVELS.get(name, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


__all__ = ["EventStream", "Label", "read_stream", "write_stream", "configure_logging", "__version__"]
