import re
from dataclasses import dataclass, field
from utils.errors import InvalidArfcn

# E-GSM 900 only; DCS-1800 and the other bands are rejected on purpose
EGSM_LOW = range(0, 125)
EGSM_HIGH = range(975, 1024)
DOWNLINK_BASE_HZ = 935_000_000
CHANNEL_SPACING_HZ = 200_000
DUPLEX_SPACING_HZ = 45_000_000
EGSM_DOWNLINK_MIN_HZ = 925_000_000
EGSM_DOWNLINK_MAX_HZ = 960_000_000

# kalibrate-rtl, e.g. "	chan: 20 (939.0MHz - 270Hz)	power:  84420.57"
SCAN_LINE = re.compile(
    r"chan:\s*(?P<arfcn>\d+)\s*\(\s*(?P<freq>\d+(?:\.\d+)?)\s*MHz\s*(?P<sign>[+-])\s*"
    r"(?P<offset>\d+(?:\.\d+)?)\s*(?P<unit>[kK]?Hz)\s*\)\s*power:\s*(?P<power>\d+(?:\.\d+)?)"
)


def is_egsm_arfcn(arfcn):
    return arfcn in EGSM_LOW or arfcn in EGSM_HIGH


def arfcn_to_downlink_hz(arfcn):
    if not isinstance(arfcn, int) or not is_egsm_arfcn(arfcn):
        raise InvalidArfcn(f"ARFCN {arfcn} is not an E-GSM 900 channel (0-124, 975-1023)")
    channel = arfcn if arfcn in EGSM_LOW else arfcn - 1024
    return DOWNLINK_BASE_HZ + CHANNEL_SPACING_HZ * channel


def arfcn_to_uplink_hz(arfcn):
    return arfcn_to_downlink_hz(arfcn) - DUPLEX_SPACING_HZ


def downlink_hz_to_arfcn(frequency_hz):
    channel, remainder = divmod(int(frequency_hz) - DOWNLINK_BASE_HZ, CHANNEL_SPACING_HZ)
    if remainder or int(frequency_hz) != frequency_hz:
        raise InvalidArfcn(f"{frequency_hz} Hz is not on the 200 kHz channel raster")
    arfcn = channel if channel >= 0 else channel + 1024
    if not is_egsm_arfcn(arfcn):
        raise InvalidArfcn(f"{frequency_hz} Hz is outside the E-GSM 900 downlink band")
    return arfcn


@dataclass(frozen=True)
class ScanEntry:
    arfcn: int
    downlink_freq_hz: int
    power: float
    offset_hz: float = 0.0


@dataclass
class ScanResult:
    entries: list = field(default_factory=list)
    ignored_lines: int = 0

    def by_power(self):
        """Candidates strongest first; ties keep scanner order."""
        return sorted(self.entries, key=lambda entry: entry.power, reverse=True)

    def __len__(self):
        return len(self.entries)


def parse_scan_output(text):
    """Parse kalibrate-style scanner output. Unmatched lines and non E-GSM channels are counted, not fatal."""
    result = ScanResult()
    for line in text.splitlines():
        if not line.strip():
            continue
        match = SCAN_LINE.search(line)
        if match is None or not is_egsm_arfcn(int(match["arfcn"])):
            result.ignored_lines += 1
            continue

        offset = float(match["offset"]) * (1000 if match["unit"].lower() == "khz" else 1)
        if match["sign"] == "-":
            offset = -offset
        result.entries.append(ScanEntry(
            arfcn=int(match["arfcn"]),
            downlink_freq_hz=round(float(match["freq"]) * 1_000_000),
            power=float(match["power"]),
            offset_hz=offset,
        ))
    return result
