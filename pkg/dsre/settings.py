import os
import logging
from dotenv import load_dotenv

load_dotenv()

LOG_LEVEL = os.getenv("DSRE_LOG_LEVEL", "INFO").upper()
LOG_FORMAT = os.getenv("DSRE_LOG_FORMAT", "%(asctime)s %(levelname)s %(name)s: %(message)s")
THREADS = int(os.getenv("DSRE_THREADS", "1"))


def configure_logging(level: str = LOG_LEVEL) -> None:
    # Logs em texto puro no stderr; nada de barra de progresso
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format=LOG_FORMAT)
