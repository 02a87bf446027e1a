"""Coupled EV charging demand, DC optimal power flow and emission inventory simulation."""

from pathlib import Path

__version__ = "0.1.0"

DATA_DIR = Path(__file__).parent / "data"
DEMO_CONFIG = DATA_DIR / "demo_config.json"
