from dotenv import load_dotenv
from utils.logger import Logger
from utils.errors import ConfigError
from dataclasses import dataclass
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
import os

ENV_PREFIX = "GCW_"

DEFAULTS = {
    "mcc": None,
    "mnc": None,
    "source": "udp:4729",
    "log": "../data/records/cmc.jsonl",
    "transitions": None,
    "location": "unknown",
    "provider": "unknown",
    "probe_duration": 10.0,
    "watchdog_period": 300.0,
    "watchdog_window": 30.0,
    "watchdog_threshold": 5,
    "gsmtap_port": 4729,
    "restart_mode": "in-process",
    "timezone": "UTC",
    "log_level": 3,
    "log_dir": "../data/logs",
    "scan_command": "kal -s EGSM",
    "receiver_command": "grgsm_livemon_headless",
    "include_nociphering": False,
}

CONVERTERS = {
    "probe_duration": float,
    "watchdog_period": float,
    "watchdog_window": float,
    "watchdog_threshold": int,
    "gsmtap_port": int,
    "log_level": int,
}


def strtobool(value):
    if isinstance(value, bool):
        return value
    lowered = str(value).strip().lower()
    if lowered in ("y", "yes", "t", "true", "on", "1"):
        return True
    if lowered in ("n", "no", "f", "false", "off", "0"):
        return False
    raise ValueError(f"invalid truth value {value!r}")


@dataclass(frozen=True)
class SensorConfig:
    target_mcc: str
    target_mnc: str
    probe_duration_s: float = 10.0
    watchdog_period_s: float = 300.0
    watchdog_window_s: float = 30.0
    watchdog_threshold: int = 5
    source: str = "udp:4729"
    gsmtap_port: int = 4729
    log_path: str = "../data/records/cmc.jsonl"
    transitions_path: str = None
    location_label: str = "unknown"
    provider_label: str = "unknown"
    restart_mode: str = "in-process"
    scan_command: str = "kal -s EGSM"
    receiver_command: str = "grgsm_livemon_headless"

    def __post_init__(self):
        if self.probe_duration_s <= 0:
            Config.raise_error(f"probe duration must be > 0, got {self.probe_duration_s}")
        if self.watchdog_window_s <= 0 or self.watchdog_window_s > self.watchdog_period_s:
            Config.raise_error(f"watchdog window ({self.watchdog_window_s}s) must be in (0, period={self.watchdog_period_s}s]")
        if self.watchdog_threshold < 0:
            Config.raise_error(f"watchdog threshold must be >= 0, got {self.watchdog_threshold}")
        if not (len(self.target_mcc) == 3 and self.target_mcc.isdigit()):
            Config.raise_error(f"MCC must be 3 digits, got '{self.target_mcc}'")
        if not (len(self.target_mnc) in (2, 3) and self.target_mnc.isdigit()):
            Config.raise_error(f"MNC must be 2 or 3 digits, got '{self.target_mnc}'")
        if self.restart_mode not in ("in-process", "exit"):
            Config.raise_error(f"restart mode must be 'in-process' or 'exit', got '{self.restart_mode}'")
        if not self.location_label or not self.provider_label:
            Config.raise_error("location and provider labels must not be empty")


class Config:
    """
    Layered settings: command-line flags > GCW_* environment (a .env file is loaded first) >
    TOML config file > built-in defaults.
    """

    def __init__(self, flags=None, config_file=None, env_file="../.env"):
        load_dotenv(env_file)
        self.logger = Logger()
        self.values = dict(DEFAULTS)

        config_file = config_file or os.getenv(f"{ENV_PREFIX}CONFIG")
        if config_file:
            self.values.update(self.load_file(config_file))

        for key in DEFAULTS:
            value = os.getenv(f"{ENV_PREFIX}{key.upper()}")
            if value is not None:
                self.values[key] = value

        for key, value in (flags or {}).items():
            if value is not None and key in DEFAULTS:
                self.values[key] = value

        try:
            for key, convert in CONVERTERS.items():
                if self.values[key] is not None:
                    self.values[key] = convert(self.values[key])
            self.values["include_nociphering"] = strtobool(self.values["include_nociphering"])
        except (TypeError, ValueError) as e:
            self.raise_error(f"Invalid setting: {e}")

        if not self.values["transitions"] and self.values["log"]:
            self.values["transitions"] = f"{os.path.splitext(self.values['log'])[0]}.sessions.jsonl"

    @staticmethod
    def load_file(path):
        """Flat key = value TOML file; a [sensor] table is also accepted."""
        try:
            with open(path, 'rb') as file:
                data = tomllib.load(file)
        except OSError as e:
            raise ConfigError(f"Unable to read config file {path}: {e}") from e
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"Invalid config file {path}: {e}") from e

        data = {**data, **data.get("sensor", {})}
        unknown = sorted(key for key in data if key not in DEFAULTS and key != "sensor")
        if unknown:
            Logger.warning(f"Ignoring unknown config keys in {path}: {', '.join(unknown)}")
        return {key: value for key, value in data.items() if key in DEFAULTS}

    def sensor_config(self):
        mcc = self.values["mcc"] or self.raise_error("Missing MCC (--mcc or GCW_MCC)")
        mnc = self.values["mnc"] or self.raise_error("Missing MNC (--mnc or GCW_MNC)")
        return SensorConfig(
            target_mcc=str(mcc),
            target_mnc=str(mnc),
            probe_duration_s=self.values["probe_duration"],
            watchdog_period_s=self.values["watchdog_period"],
            watchdog_window_s=self.values["watchdog_window"],
            watchdog_threshold=self.values["watchdog_threshold"],
            source=self.values["source"],
            gsmtap_port=self.values["gsmtap_port"],
            log_path=self.values["log"],
            transitions_path=self.values["transitions"],
            location_label=self.values["location"],
            provider_label=self.values["provider"],
            restart_mode=self.values["restart_mode"],
            scan_command=self.values["scan_command"],
            receiver_command=self.values["receiver_command"],
        )

    def __getitem__(self, key):
        return self.values.get(key)

    @staticmethod
    def raise_error(msg):
        raise ConfigError(msg)
