from os import environ

from dotenv import load_dotenv

# Only ambient runtime knobs live here; experiments are configured by file.
load_dotenv()

LOG_LEVEL = environ.get("IDEALSIM_LOG_LEVEL", "INFO").upper()
LOG_FORMAT = environ.get(
    "IDEALSIM_LOG_FORMAT",
    "%(asctime)s %(levelname)s %(name)s: %(message)s",
)
