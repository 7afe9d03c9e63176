from __future__ import annotations

from pathlib import Path
from typing import Optional

from dotenv import load_dotenv


def load_env(path: Optional[Path] = None) -> bool:
    # Loads .env (cwd or the given file) if present; no-op when missing.
    # Must run before src.bench.settings is imported.
    return bool(load_dotenv(dotenv_path=path, override=False))
