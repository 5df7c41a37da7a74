import io
import os
import json
import aiofiles
import numpy as np
import pandas as pd
from typing import Optional
from dataclasses import dataclass
from utils.errors import MalformedRecord, SinkWriteError, SourceUnavailable
from utils.um_parser import NO_CIPHERING_LABEL, CipherAlgo
from utils.logger import Logger

RECORD_KEYS = ("ts", "algo", "mcc", "mnc", "lac", "cid", "arfcn", "chan", "location", "provider")
TRANSITION_KEYS = ("ts", "from", "to", "reason")
ALGO_LABELS = frozenset([*(algo.label for algo in CipherAlgo), NO_CIPHERING_LABEL])


@dataclass(frozen=True)
class CmcRecord:
    timestamp_utc: float
    algo: Optional[CipherAlgo]
    mcc: str
    mnc: str
    lac: int
    cid: int
    arfcn: int
    channel_type: str
    location_label: str
    provider_label: str

    @property
    def algo_label(self):
        return self.algo.label if self.algo is not None else NO_CIPHERING_LABEL

    def to_dict(self):
        return {
            "ts": self.timestamp_utc,
            "algo": self.algo_label,
            "mcc": self.mcc,
            "mnc": self.mnc,
            "lac": self.lac,
            "cid": self.cid,
            "arfcn": self.arfcn,
            "chan": self.channel_type,
            "location": self.location_label,
            "provider": self.provider_label,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), separators=(",", ":"))


class JsonLinesSink:
    """
    Append-only JSON Lines writer. Every object goes out in a single write call followed by a
    flush, so an interrupted run leaves whole lines only.
    """

    def __init__(self, path):
        self.path = path
        self.file = None
        self.written = 0

    async def open(self):
        directory = os.path.dirname(self.path)
        try:
            if directory:
                os.makedirs(directory, exist_ok=True)
            self.file = await aiofiles.open(self.path, "a", encoding="utf-8")
        except OSError as e:
            raise SinkWriteError(f"Unable to open {self.path}: {e}") from e
        return self

    async def write_line(self, payload):
        if self.file is None:
            await self.open()
        try:
            await self.file.write(json.dumps(payload, separators=(",", ":")) + "\n")
            await self.file.flush()
        except OSError as e:
            raise SinkWriteError(f"Unable to write to {self.path}: {e}") from e
        self.written += 1

    async def close(self):
        if self.file is not None:
            try:
                await self.file.flush()
                await self.file.close()
            except OSError as e:
                Logger.error(f"Unable to flush {self.path}: {e}")
            self.file = None

    async def __aenter__(self):
        return await self.open()

    async def __aexit__(self, exc_type, exc, tb):
        await self.close()


class RecordSink(JsonLinesSink):
    async def write(self, record: CmcRecord):
        await self.write_line(record.to_dict())


class TransitionSink(JsonLinesSink):
    async def write(self, timestamp, from_state, to_state, reason):
        await self.write_line({"ts": timestamp, "from": from_state, "to": to_state, "reason": reason})


def write_records(records, stream, fmt="jsonl"):
    """Synchronous export of a batch of records as JSON Lines or CSV (header always present)."""
    if fmt == "jsonl":
        for record in records:
            stream.write(record.to_json() + "\n")
    elif fmt == "csv":
        frame = pd.DataFrame([record.to_dict() for record in records], columns=list(RECORD_KEYS))
        frame.to_csv(stream, index=False, lineterminator="\n")
    else:
        raise ValueError(f"Unknown record format '{fmt}'")


def load_record_frame(path):
    """
    Load a record log as a DataFrame with exactly the RECORD_KEYS columns. `.csv` files are read
    with a header row; anything else is JSON Lines. Validation runs column by column.

    Raises:
        SourceUnavailable: the file cannot be opened.
        MalformedRecord: a row cannot be parsed; the 1-based line number of the first bad row is attached.
    """
    if str(path).lower().endswith(".csv"):
        return _load_csv(path)

    try:
        with open(path, "rb") as log:
            data = log.read()
    except OSError as e:
        raise SourceUnavailable(f"Unable to open {path}: {e}") from e
    try:
        lines = data.decode("utf-8").split("\n")
    except UnicodeDecodeError as e:
        raise MalformedRecord(path, data.count(b"\n", 0, e.start) + 1, "not UTF-8") from e

    line_numbers = [number for number, line in enumerate(lines, start=1) if line.strip()]
    if not line_numbers:
        return pd.DataFrame(columns=list(RECORD_KEYS))

    body = [lines[number - 1] for number in line_numbers]
    for number, line in zip(line_numbers, body):
        if not line.lstrip().startswith("{"):
            raise MalformedRecord(path, number, "not a JSON object")

    try:
        frame = pd.read_json(io.StringIO("\n".join(body)), orient="records", lines=True, dtype=False,
                             convert_dates=False, keep_default_dates=False, precise_float=True)
    except ValueError as e:
        raise MalformedRecord(path, _first_unparsable(body, line_numbers), str(e)) from e
    if len(frame) != len(line_numbers):
        raise MalformedRecord(path, _first_unparsable(body, line_numbers), "not one JSON object per line")
    return validate_record_frame(frame, path, line_numbers)


def _first_unparsable(body, line_numbers):
    for number, line in zip(line_numbers, body):
        try:
            json.loads(line)
        except ValueError:
            return number
    return line_numbers[0]


def _load_csv(path):
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except OSError as e:
        raise SourceUnavailable(f"Unable to open {path}: {e}") from e
    except (ValueError, pd.errors.ParserError) as e:
        raise MalformedRecord(path, 1, str(e)) from e

    missing = [key for key in RECORD_KEYS if key not in frame.columns]
    if missing:
        raise MalformedRecord(path, 1, f"header lacks {', '.join(missing)}")
    # header is line 1
    return validate_record_frame(frame, path, list(range(2, len(frame) + 2)))


def validate_record_frame(frame, path, line_numbers):
    """
    Coerce a raw record table to the log schema. `line_numbers[i]` is the source line of row i.

    Raises:
        MalformedRecord: the earliest row that fails any check.
    """
    missing = [key for key in RECORD_KEYS if key not in frame.columns]
    if missing:
        raise MalformedRecord(path, line_numbers[0] if line_numbers else 1, f"missing {', '.join(missing)}")

    frame = frame[list(RECORD_KEYS)].reset_index(drop=True)
    checks = [(frame[key].isna(), f"missing {key}") for key in RECORD_KEYS]

    ts = pd.to_numeric(frame["ts"], errors="coerce")
    checks.append((ts.isna(), "ts is not a number"))
    numbers = {key: pd.to_numeric(frame[key], errors="coerce") for key in ("lac", "cid", "arfcn")}
    checks += [(~np.isfinite(values.astype(float)), f"{key} is not a number") for key, values in numbers.items()]

    text = {key: frame[key].astype(str) for key in ("algo", "mcc", "mnc", "chan")}
    checks.append((~text["algo"].isin(ALGO_LABELS), "unknown algorithm label"))
    checks.append((~text["mcc"].str.fullmatch(r"\d{3}"), "bad MCC"))
    checks.append((~text["mnc"].str.fullmatch(r"\d{2,3}"), "bad MNC"))

    labels = {key: frame[key].astype(str).str.strip() for key in ("location", "provider")}
    checks += [((values == "") | (values == "nan"), f"empty {key} label") for key, values in labels.items()]

    failing = np.column_stack([mask.to_numpy(dtype=bool) for mask, _ in checks])
    bad_rows = failing.any(axis=1)
    if bad_rows.any():
        row = int(np.argmax(bad_rows))
        reason = checks[int(np.argmax(failing[row]))][1]
        raise MalformedRecord(path, line_numbers[row], reason)

    return pd.DataFrame({
        "ts": ts.astype(float),
        "algo": text["algo"],
        "mcc": text["mcc"],
        "mnc": text["mnc"],
        **{key: values.astype("int64") for key, values in numbers.items()},
        "chan": text["chan"],
        **labels,
    }, columns=list(RECORD_KEYS))
