import os

from dotenv import load_dotenv

load_dotenv()


def _env_flag(name, default):
    value = os.getenv(name)
    if value is None:
        return default
    return value.strip().lower() not in ("0", "false", "no", "off", "")


class Config:
    # Worker cap for sweeps and batched evaluation; unset means all cores
    NUM_THREADS = int(os.getenv("SNN_NUM_THREADS") or os.cpu_count() or 1)
    LOG_LEVEL = os.getenv("SNN_LOG_LEVEL", "INFO").upper()
    SHOW_PROGRESS = _env_flag("SNN_PROGRESS", True)
