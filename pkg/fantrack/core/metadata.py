"""Content digests and run metadata."""
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Optional

from .mesh import TriangleMesh


class MetadataManager:
    """Digest helpers used to tie templates and reports to their inputs."""

    CHUNK_SIZE = 8192  # 8KB chunks for checksum calculation
    DIGEST_SIZE = 32

    @staticmethod
    def mesh_digest(mesh: TriangleMesh) -> bytes:
        """SHA-256 over the mesh geometry (independent of file formatting)."""
        sha256_hash = hashlib.sha256()
        sha256_hash.update(mesh.vertices.astype("<f8").tobytes())
        sha256_hash.update(mesh.triangles.astype("<i8").tobytes())
        return sha256_hash.digest()

    @staticmethod
    def calculate_sha256(file_path: Path) -> str:
        """Calculate SHA256 checksum for a file."""
        sha256_hash = hashlib.sha256()
        with open(file_path, "rb") as f:
            for chunk in iter(lambda: f.read(MetadataManager.CHUNK_SIZE), b""):
                sha256_hash.update(chunk)
        return sha256_hash.hexdigest()

    @staticmethod
    def save_json(data: dict, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            json.dump(data, f, indent=2)


@dataclass
class RunMetadata:
    """Provenance written next to trajectories and metric reports."""

    sequence: str
    mesh_sha256: str
    templates_sha256: Optional[str] = None
    modality: str = "joint"
    policy: str = "no_reset"
    config: Dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunMetadata":
        return cls(**data)

    def save(self, path: Path) -> None:
        MetadataManager.save_json(self.to_dict(), path)
