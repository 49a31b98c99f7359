import logging
import os
import sys

logging.basicConfig(
    level=os.getenv("ADVMC_LOG_LEVEL", "INFO").upper(),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[logging.StreamHandler(sys.stderr)]
)

def get_logger(name: str):
    return logging.getLogger(name)
