import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

from models.errors import ConfigError

logger = logging.getLogger(__name__)

TOOL_VERSION = "0.1.0"
MANIFEST_FILE = "manifest.json"


@dataclass
class RunManifest:
    command: str
    config: Dict[str, Any]
    master_seed: int
    tool_version: str = TOOL_VERSION
    timestamp: str = ""
    config_checksum: str = ""
    outputs: Dict[str, str] = field(default_factory=dict)


def file_checksum(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


class ReportService:
    """Run manifests: what was run, with which resolved options, producing which files."""

    def build_manifest(self, command: str, config: Dict[str, Any], master_seed: int) -> RunManifest:
        return RunManifest(
            command=command,
            config=dict(config),
            master_seed=int(master_seed),
            timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
            config_checksum=self._generate_checksum(config),
        )

    def _generate_checksum(self, config: Dict[str, Any]) -> str:
        """Checksum of the resolved config, independent of key order"""
        config_string = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(config_string.encode("utf-8")).hexdigest()

    def record_outputs(self, manifest: RunManifest, out_dir: str, filenames: List[str]):
        for name in sorted(filenames):
            manifest.outputs[name] = file_checksum(os.path.join(out_dir, name))

    def save_manifest(self, manifest: RunManifest, out_dir: str, filename: Optional[str] = None) -> str:
        os.makedirs(out_dir, exist_ok=True)
        filepath = os.path.join(out_dir, filename or MANIFEST_FILE)
        tmp_path = filepath + ".tmp"
        with open(tmp_path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(asdict(manifest), f, indent=2, ensure_ascii=False, default=str)
            f.write("\n")
        os.replace(tmp_path, filepath)
        logger.info(f"[Report] Manifest written: {filepath}")
        return filepath

    def load_manifest(self, filepath: str) -> RunManifest:
        try:
            with open(filepath, "r", encoding="utf-8") as f:
                payload = json.load(f)
            return RunManifest(**payload)
        except (OSError, ValueError, TypeError) as e:
            raise ConfigError(f"cannot read manifest {filepath}: {e}") from None

    def verify_outputs(self, manifest: RunManifest, out_dir: str) -> Dict[str, bool]:
        """Which recorded outputs in `out_dir` still match their checksums."""
        result = {}
        for name, checksum in manifest.outputs.items():
            path = os.path.join(out_dir, name)
            result[name] = os.path.exists(path) and file_checksum(path) == checksum
        return result
