import json
import time
import asyncio
from collections import deque
from dataclasses import dataclass
from scapy.error import Scapy_Exception
from scapy.layers.inet import IP, UDP
from scapy.layers.l2 import Ether
from scapy.utils import RawPcapReader, RawPcapNgReader
from utils.errors import (ConfigError, CorruptCaptureHeader, GsmtapError, SourceUnavailable,
                          UnsupportedLinkType, MalformedRecord)
from utils.gsmtap import GSMTAP_PORT, PayloadType, encode_gsmtap, parse_gsmtap
from utils.logger import Logger

DLT_EN10MB = 1


@dataclass
class CaptureCounters:
    frames: int = 0
    malformed: int = 0
    filtered_out: int = 0
    non_um: int = 0

    def as_dict(self):
        return {"frames": self.frames, "malformed": self.malformed,
                "filtered_out": self.filtered_out, "non_um": self.non_um}


class CaptureSource:
    """
    Yields (arrival_timestamp_utc, raw GSMTAP datagram) pairs in arrival order. Exhaustion of
    the iterator is the end-of-stream event; it is never signalled with an exception.
    """
    live = False

    def __init__(self):
        self.counters = CaptureCounters()

    def iter_datagrams(self):
        raise NotImplementedError(f"{self.__class__.__name__} can only be read asynchronously")

    async def datagrams(self):
        for index, item in enumerate(self.iter_datagrams()):
            yield item
            if index % 512 == 511:
                await asyncio.sleep(0)

    def decode(self, timestamp, datagram):
        """Decode one datagram, updating counters. Returns None for skipped datagrams."""
        try:
            frame = parse_gsmtap(datagram)
        except GsmtapError as error:
            self.counters.malformed += 1
            Logger.debug(f"Skipping malformed GSMTAP datagram at {timestamp:.6f}: {error}")
            return None

        self.counters.frames += 1
        if frame.payload_type is not PayloadType.UM:
            self.counters.non_um += 1
        return frame


class PcapFile(CaptureSource):
    """Classic libpcap capture (microsecond or nanosecond variant), Ethernet-II / IPv4 / UDP only."""

    def __init__(self, path, port=GSMTAP_PORT):
        super().__init__()
        self.path = str(path)
        self.port = port

    def open_reader(self):
        try:
            reader = RawPcapReader(self.path)
        except OSError as error:
            raise SourceUnavailable(f"Unable to open {self.path}: {error}") from error
        except Scapy_Exception as error:
            raise CorruptCaptureHeader(f"{self.path}: {error}") from error

        if isinstance(reader, RawPcapNgReader):
            reader.close()
            raise CorruptCaptureHeader(f"{self.path}: pcapng captures are not supported")
        if reader.linktype != DLT_EN10MB:
            reader.close()
            raise UnsupportedLinkType(f"{self.path}: link type {reader.linktype} (only Ethernet is supported)")
        return reader

    def iter_datagrams(self):
        reader = self.open_reader()
        divisor = 1e9 if getattr(reader, "nano", False) else 1e6
        try:
            for data, metadata in reader:
                timestamp = metadata.sec + metadata.usec / divisor
                datagram = self.extract_udp_payload(data)
                if datagram is not None:
                    yield timestamp, datagram
        finally:
            reader.close()

    def extract_udp_payload(self, data):
        try:
            packet = Ether(data)
        except Exception as error:
            self.counters.malformed += 1
            Logger.debug(f"Undecodable Ethernet frame: {error}")
            return None

        if IP not in packet or UDP not in packet or packet[IP].frag or packet[IP].flags.MF:
            self.counters.filtered_out += 1
            return None

        udp = packet[UDP]
        if udp.dport != self.port:
            self.counters.filtered_out += 1
            return None

        payload = bytes(udp.payload)
        if udp.len is not None and udp.len >= 8:
            payload = payload[:udp.len - 8]
        return payload


class ScriptedReplay(CaptureSource):
    """In-memory (or JSON Lines backed) sequence of datagrams, replayed verbatim."""

    def __init__(self, datagrams):
        super().__init__()
        self.items = [(float(ts), bytes(raw)) for ts, raw in datagrams]

    @classmethod
    def from_frames(cls, frames):
        return cls([(ts, encode_gsmtap(frame)) for ts, frame in frames])

    @classmethod
    def load(cls, path):
        """Load a replay file: one {"ts": <float>, "hex": "<datagram>"} object per line."""
        items = []
        try:
            with open(path, 'r', encoding='utf-8') as replay:
                for line_number, line in enumerate(replay, start=1):
                    if not line.strip():
                        continue
                    try:
                        entry = json.loads(line)
                        items.append((float(entry["ts"]), bytes.fromhex(entry["hex"])))
                    except (ValueError, KeyError, TypeError) as error:
                        raise MalformedRecord(path, line_number, f"bad replay entry: {error}") from error
        except OSError as error:
            raise SourceUnavailable(f"Unable to open {path}: {error}") from error
        return cls(items)

    def save(self, path):
        with open(path, 'w', encoding='utf-8') as replay:
            for ts, raw in self.items:
                replay.write(json.dumps({"ts": ts, "hex": raw.hex()}) + "\n")

    def iter_datagrams(self):
        yield from self.items


class _QueueProtocol(asyncio.DatagramProtocol):
    def __init__(self, queue):
        self.queue = queue

    def datagram_received(self, data, addr):
        self.queue.put_nowait((time.time(), data))

    def error_received(self, exc):
        Logger.warning(f"UDP receive error: {exc}")


class UdpListener(CaptureSource):
    """Live GSMTAP feed, one message per datagram. Timestamps are receive time."""
    live = True
    _END = object()

    def __init__(self, host="0.0.0.0", port=GSMTAP_PORT):
        super().__init__()
        self.host = host
        self.port = port
        self.queue = None
        self.transport = None

    async def open(self):
        self.queue = asyncio.Queue()
        loop = asyncio.get_running_loop()
        try:
            self.transport, _ = await loop.create_datagram_endpoint(
                lambda: _QueueProtocol(self.queue), local_addr=(self.host, self.port))
        except OSError as error:
            raise SourceUnavailable(f"Unable to bind UDP {self.host}:{self.port}: {error}") from error
        Logger.info(f"Listening for GSMTAP on {self.host}:{self.port}")

    def stop(self):
        if self.transport is not None:
            self.transport.close()
            self.transport = None
        if self.queue is not None:
            self.queue.put_nowait(self._END)

    async def datagrams(self):
        if self.queue is None:
            await self.open()
        while True:
            item = await self.queue.get()
            if item is self._END:
                return
            yield item


def read_capture(source):
    """Synchronous frame stream for file-backed sources: yields (timestamp, GsmtapFrame)."""
    for timestamp, datagram in source.iter_datagrams():
        frame = source.decode(timestamp, datagram)
        if frame is not None:
            yield timestamp, frame


async def aread_capture(source):
    """Asynchronous frame stream for any source, live sources included."""
    async for timestamp, datagram in source.datagrams():
        frame = source.decode(timestamp, datagram)
        if frame is not None:
            yield timestamp, frame


def open_source(spec, port=GSMTAP_PORT):
    """Build a CaptureSource from 'udp:PORT', 'pcap:PATH' or 'replay:PATH'."""
    kind, _, argument = spec.partition(":")
    if kind == "udp":
        if argument and not argument.isdigit():
            raise ConfigError(f"Invalid UDP port in source '{spec}'")
        return UdpListener(port=int(argument) if argument else port)
    if kind == "pcap":
        return PcapFile(argument, port=port)
    if kind == "replay":
        return ScriptedReplay.load(argument)
    raise ConfigError(f"Unknown source '{spec}' (expected udp:PORT, pcap:PATH or replay:PATH)")


class FrameStream:
    """
    Pull-style view over `aread_capture` with push-back, shared by the scanner, the probes and
    the locked ingestion loop. `next()` returns None on end of stream (then `ended` is True) or
    when `timeout` expires first; the pending read survives a timeout.
    """

    def __init__(self, source, clock=None):
        self.source = source
        self.clock = clock
        self.frames = aread_capture(source)
        self.pushed_back = deque()
        self.pending = None
        self.ended = False

    @property
    def exhausted(self):
        return self.ended and not self.pushed_back

    def push_back(self, item):
        self.pushed_back.appendleft(item)

    def push_back_all(self, items):
        for item in reversed(items):
            self.pushed_back.appendleft(item)

    async def next(self, timeout=None):
        if self.pushed_back:
            return self.pushed_back.popleft()
        if self.ended:
            return None

        if self.pending is None:
            self.pending = asyncio.ensure_future(self.frames.__anext__())
        done, _ = await asyncio.wait({self.pending}, timeout=timeout)
        if not done:
            return None

        pending, self.pending = self.pending, None
        try:
            item = pending.result()
        except StopAsyncIteration:
            self.ended = True
            return None

        if self.clock is not None:
            await self.clock.advance_to(item[0])
        return item

    async def close(self):
        if self.pending is not None:
            self.pending.cancel()
            await asyncio.gather(self.pending, return_exceptions=True)
            self.pending = None
        self.ended = True
        try:
            await self.frames.aclose()
        except RuntimeError as e:
            Logger.debug(f"Frame stream already closing: {e}")
