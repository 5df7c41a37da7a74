class ToolkitError(Exception):
    """Base class for every error the toolkit raises on purpose. `exit_code` is what the CLI returns."""
    exit_code = 1


# Exit code families: 2 usage/config, 3 source/I-O, 4 data corruption
class ConfigError(ToolkitError):
    exit_code = 2


class SourceError(ToolkitError):
    exit_code = 3


class DataError(ToolkitError):
    exit_code = 4


class CipherError(ToolkitError):
    exit_code = 2


# gsmtap_ingest
class GsmtapError(ToolkitError, ValueError):
    exit_code = 4


class TooShort(GsmtapError):
    pass


class UnsupportedVersion(GsmtapError):
    pass


class SourceUnavailable(SourceError):
    pass


class CorruptCaptureHeader(SourceError):
    pass


class UnsupportedLinkType(SourceError):
    pass


# um_parser
class L2Error(ToolkitError, ValueError):
    exit_code = 4


class BadLength(L2Error):
    pass


class MalformedHeader(L2Error):
    pass


class UnsupportedChannel(L2Error):
    pass


class RRError(ToolkitError, ValueError):
    exit_code = 4


class Truncated(RRError):
    pass


class BadBcd(RRError):
    pass


# a5_core
class NotInvertible(CipherError):
    pass


class FrameNumberOutOfRange(CipherError):
    pass


class LengthMismatch(CipherError):
    pass


# monitor_orchestrator
class InvalidArfcn(ConfigError):
    pass


class NoProviderFound(SourceError):
    pass


class SinkWriteError(SourceError):
    pass


class WatchdogRestart(SourceError):
    """Raised in exit-and-respawn mode so the service manager restarts the sensor."""


# campaign_analytics
class EmptyCell(DataError):
    pass


class NoData(DataError):
    pass


class MalformedRecord(DataError):
    def __init__(self, path, line_number, reason):
        self.path = path
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"{path}:{line_number}: {reason}")
