""" Process-wide runtime settings with environment variables support """
import os, json, logging
from dataclasses import dataclass
from typing import Dict, Optional, Any, ClassVar
from threading import Lock
from dotenv import load_dotenv

load_dotenv()
logger = logging.getLogger(__name__)

OVERLAY_FILE = ".rabi_config.json"
_TRUE_VALUES = ("true", "1", "yes")


@dataclass
class Settings:
    max_workers: int = 4
    output_dir: str = "output"
    log_level: str = "INFO"
    log_format: str = "text"
    allow_warnings: bool = False
    default_format: str = "csv"

    # Singleton instance
    _instance: ClassVar[Optional['Settings']] = None
    _lock: ClassVar[Lock] = Lock()
    _overlay_fields: ClassVar[set] = {
        'max_workers', 'output_dir', 'log_level', 'allow_warnings', 'default_format'
    }

    @classmethod
    def get_instance(cls) -> 'Settings':
        """ Get singleton instance - Thread-safe implementation """
        with cls._lock:
            if cls._instance is None:
                cls._instance = cls.from_env()
                logger.debug("Settings loaded")
        return cls._instance

    @classmethod
    def from_env(cls) -> 'Settings':
        """Load configuration from environment variables"""
        return cls(
            max_workers=int(os.getenv("RABI_MAX_WORKERS", "4")),
            output_dir=os.getenv("RABI_OUTPUT_DIR", "output"),
            log_level=os.getenv("RABI_LOG_LEVEL", "INFO").upper(),
            log_format=os.getenv("RABI_LOG_FORMAT", "text").lower(),
            allow_warnings=os.getenv("RABI_ALLOW_WARNINGS", "false").lower() in _TRUE_VALUES,
            default_format=os.getenv("RABI_DEFAULT_FORMAT", "csv").lower(),
        )

    def __post_init__(self):
        """Validate fields, then apply the optional overlay file"""
        self.validate()
        if os.path.exists(OVERLAY_FILE):
            try:
                with open(OVERLAY_FILE, 'r') as f:
                    self.update_from_dict(json.load(f))
            except json.JSONDecodeError as e:
                logger.warning(f"Settings overlay file corrupt: {e}")

    def validate(self) -> None:
        if self.max_workers < 1:
            raise ValueError("RABI_MAX_WORKERS must be at least 1")
        if not isinstance(logging.getLevelName(self.log_level), int):
            raise ValueError(f"RABI_LOG_LEVEL is not a logging level: {self.log_level}")
        if self.log_format not in ("text", "json"):
            raise ValueError("RABI_LOG_FORMAT must be 'text' or 'json'")
        if self.default_format not in ("csv", "json"):
            raise ValueError("RABI_DEFAULT_FORMAT must be 'csv' or 'json'")

    def update_from_dict(self, updates: Dict[str, Any]) -> Dict[str, Any]:
        """Apply whitelisted overrides, coercing strings to the field's type.

        The result is validated as a whole; on failure every field keeps its previous value.
        """
        previous = {key: getattr(self, key) for key in self._overlay_fields}
        applied: Dict[str, Any] = {}
        for key, value in updates.items():
            if key not in self._overlay_fields:
                logger.warning(f"Ignoring unknown settings key {key!r}")
                continue
            current_type = type(previous[key])
            try:
                if current_type is bool and isinstance(value, str):
                    value = value.lower() in _TRUE_VALUES
                elif current_type is int and isinstance(value, str):
                    value = int(value)
                elif current_type is str and isinstance(value, str) and key in ('log_level', 'default_format'):
                    value = value.upper() if key == 'log_level' else value.lower()
            except ValueError:
                logger.warning(f"Could not coerce {key}={value!r}, keeping {previous[key]!r}")
                continue
            setattr(self, key, value)
            applied[key] = value
        try:
            self.validate()
        except ValueError:
            for key, value in previous.items():
                setattr(self, key, value)
            raise
        for key, value in applied.items():
            logger.info(f"Updated {key} → {value!r}")
        return applied


def get_config() -> Settings:
    """Get current configuration instance"""
    return Settings.get_instance()
