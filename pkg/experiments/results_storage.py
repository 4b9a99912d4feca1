"""
Results Storage Module

Writes experiment outputs (CSV via pandas, JSON) into a content-addressed
directory <out>/<config-hash>/ and keeps its manifest.json: config hash,
every produced file with its SHA-256, wall-clock and path-count
accounting, toolkit version.
"""

import hashlib
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional

import pandas as pd

from simulation.conf import get_simulation_setting

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def file_checksum(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def dumps_json(data) -> str:
    return json.dumps(data, sort_keys=True, indent=2, default=_json_default) + "\n"


def _json_default(value):
    # numpy scalars and arrays
    if hasattr(value, "tolist"):
        return value.tolist()
    if hasattr(value, "value"):
        return value.value
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


class ExperimentResultsStorage:
    """Result directory of one experiment config"""

    def __init__(self, out_dir: str, config_hash: str, toolkit_version: Optional[str] = None):
        """
        Initialize storage.

        Args:
            out_dir: Output root (--out)
            config_hash: SHA-256 of the canonical config
            toolkit_version: Version recorded in the manifest (settings default)
        """
        self.root = Path(out_dir)
        self.config_hash = config_hash
        self.toolkit_version = toolkit_version or get_simulation_setting('TOOLKIT_VERSION')
        self.run_dir = self.root / config_hash
        self.manifest_path = self.run_dir / MANIFEST_NAME
        self._files: List[str] = []

    # -- cache -------------------------------------------------------------

    def load_manifest(self) -> Optional[Dict]:
        if not self.manifest_path.is_file():
            return None
        try:
            return json.loads(self.manifest_path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as e:
            logger.warning(f"⚠ Unreadable manifest {self.manifest_path}: {e}")
            return None

    def cached_manifest(self) -> Optional[Dict]:
        """
        Manifest of a previous identical run, or None.

        A hit needs the same config hash and toolkit version, and every
        listed file present with its recorded checksum.
        """
        manifest = self.load_manifest()
        if manifest is None:
            return None
        if manifest.get("config_hash") != self.config_hash:
            return None
        if manifest.get("toolkit_version") != self.toolkit_version:
            logger.info(f"Cache entry {self.config_hash[:12]} is from toolkit "
                        f"{manifest.get('toolkit_version')}, recomputing")
            return None
        for entry in manifest.get("files", []):
            path = self.run_dir / entry["path"]
            if not path.is_file() or file_checksum(path) != entry["sha256"]:
                logger.warning(f"⚠ Cached file {path} missing or modified, recomputing")
                return None
        return manifest

    def reset(self) -> None:
        """Remove files of a previous run of this config"""
        if self.run_dir.is_dir():
            for path in self.run_dir.iterdir():
                if path.is_file():
                    path.unlink()
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self._files = []
        logger.info(f"Results storage initialized at {self.run_dir}")

    # -- writers -----------------------------------------------------------

    def _register(self, name: str) -> Path:
        if name in self._files:
            raise ValueError(f"output {name} written twice")
        self._files.append(name)
        return self.run_dir / name

    def save_frame(self, frame: pd.DataFrame, name: str) -> Path:
        """CSV: UTF-8, header row, '.' decimals, '\\n' line ends"""
        path = self._register(name)
        frame.to_csv(path, index=False, float_format="%.12g", lineterminator="\n", encoding="utf-8")
        logger.info(f"✓ Saved {name} ({len(frame)} rows)")
        return path

    def save_json(self, data: Dict, name: str) -> Path:
        path = self._register(name)
        path.write_text(dumps_json(data), encoding="utf-8")
        logger.info(f"✓ Saved {name}")
        return path

    def register_file(self, name: str) -> Path:
        """Reserve a name for a file written by another writer (binary dumps)"""
        return self._register(name)

    def write_manifest(
        self,
        config: Dict,
        wall_clock_seconds: float,
        path_count: int,
        summary: Optional[Dict] = None,
    ) -> Dict:
        """Checksum every output and write manifest.json"""
        manifest = {
            "config_hash": self.config_hash,
            "toolkit_version": self.toolkit_version,
            "config": config,
            "created_at": datetime.now(timezone.utc).isoformat(),
            "wall_clock_seconds": round(float(wall_clock_seconds), 3),
            "path_count": int(path_count),
            "files": [
                {"path": name, "sha256": file_checksum(self.run_dir / name)}
                for name in sorted(self._files)
            ],
            "summary": summary or {},
        }
        self.manifest_path.write_text(dumps_json(manifest), encoding="utf-8")
        logger.info(f"✓ Manifest written: {len(self._files)} files in {self.run_dir}")
        return manifest
