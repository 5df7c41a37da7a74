import inspect
import deepdiff
from enum import Enum
from typing import Optional
from dataclasses import dataclass, field, asdict
from utils.logger import Logger
from utils.config import SensorConfig
from utils.capture import FrameStream, read_capture
from utils.task_handler import TaskHandler, SimulatedClock, WallClock
from utils.radio import StreamReceiver
from utils.records import CmcRecord
from utils.errors import NoProviderFound, WatchdogRestart
from utils.um_parser import CipherModeCommand, Si3Info, decode_frame


class SessionPhase(Enum):
    SCANNING = "Scanning"
    PROBING = "Probing"
    LOCKED = "Locked"
    RESTARTING = "Restarting"


class WatchdogAction(Enum):
    CONTINUE = "Continue"
    RESTART = "Restart"


@dataclass(frozen=True)
class LockedChannel:
    arfcn: int
    si3: Si3Info
    power: float


@dataclass(frozen=True)
class Transition:
    timestamp: float
    from_phase: SessionPhase
    to_phase: SessionPhase
    reason: str


@dataclass
class SessionState:
    phase: SessionPhase = SessionPhase.SCANNING
    candidates: list = field(default_factory=list)
    index: int = 0
    locked: Optional[LockedChannel] = None
    transitions: list = field(default_factory=list)

    def move_to(self, timestamp, phase, reason):
        transition = Transition(timestamp, self.phase, phase, reason)
        self.transitions.append(transition)
        self.phase = phase
        if phase is not SessionPhase.LOCKED:
            self.locked = None
        return transition


class Si3Counter:
    """Shared between the ingestion loop and the watchdog: increment and swap-to-zero only."""

    def __init__(self):
        self.count = 0

    def increment(self):
        self.count += 1

    def swap(self):
        count, self.count = self.count, 0
        return count


def watchdog_evaluate(si3_count_in_window, cfg):
    """Restart iff fewer than `watchdog_threshold` SI3 were seen in the window."""
    if si3_count_in_window < cfg.watchdog_threshold:
        return WatchdogAction.RESTART
    return WatchdogAction.CONTINUE


def matches_provider(si3, cfg):
    return si3.mcc == cfg.target_mcc and si3.mnc == cfg.target_mnc


async def select_channel(scan, cfg: SensorConfig, probe, state: SessionState = None):
    """
    Probe the scanned channels strongest first and lock on the first one whose SI3 carries the
    configured MCC/MNC.

    Args:
        scan (ScanResult): scanner output.
        cfg (SensorConfig): target provider and probe duration.
        probe: callable(arfcn, duration) returning an Si3Info or None, plain or awaitable.
        state (SessionState, optional): receives the candidate list and probe index.

    Returns:
        LockedChannel: the chosen ARFCN with the SI3 that matched.

    Raises:
        NoProviderFound: no candidate broadcast a matching SI3.
    """
    candidates = scan.by_power()
    if state is not None:
        state.candidates, state.index = candidates, 0

    for index, entry in enumerate(candidates):
        if state is not None:
            state.index = index
        si3 = probe(entry.arfcn, cfg.probe_duration_s)
        if inspect.isawaitable(si3):
            si3 = await si3

        if si3 is None:
            Logger.info(f"ARFCN {entry.arfcn}: no SI3 within {cfg.probe_duration_s}s")
            continue
        if not matches_provider(si3, cfg):
            Logger.info(f"ARFCN {entry.arfcn}: cell of {si3.mcc}-{si3.mnc}, looking for {cfg.target_mcc}-{cfg.target_mnc}")
            continue

        Logger.info(f"ARFCN {entry.arfcn}: {si3.mcc}-{si3.mnc} LAC {si3.lac} CID {si3.cell_id}, power {entry.power:g}")
        return LockedChannel(arfcn=entry.arfcn, si3=si3, power=entry.power)

    raise NoProviderFound(f"none of {len(candidates)} channels carries {cfg.target_mcc}-{cfg.target_mnc}")


class CipherMonitor:
    """
    Sensor lifecycle: scan, probe for the configured provider, lock, turn every Cipher Mode
    Command into a CmcRecord and let the SI3 watchdog decide when to start over.
    """

    def __init__(self, cfg: SensorConfig, source, receiver=None, clock=None,
                 record_sink=None, transition_sink=None):
        self.cfg = cfg
        self.source = source
        self.clock = clock or (WallClock() if source.live else SimulatedClock())
        self.receiver = receiver or StreamReceiver(self.clock)
        self.record_sink = record_sink
        self.transition_sink = transition_sink
        self.logger = Logger()

        self.state = SessionState()
        self.restart_reason = None
        self.last_timestamp = None
        self.stats = {"cmc": 0, "unlocked_cmc": 0, "si3": 0, "records": 0, "restarts": 0, "clamped": 0}

    async def move_to(self, phase, reason):
        transition = self.state.move_to(self.clock.now(), phase, reason)
        self.logger.info(f"{transition.from_phase.value} -> {transition.to_phase.value}: {reason}")
        if self.transition_sink is not None:
            await self.transition_sink.write(transition.timestamp, transition.from_phase.value,
                                             transition.to_phase.value, reason)

    def note_unlocked(self, timestamp, frame, message):
        if isinstance(message, CipherModeCommand):
            self.stats["unlocked_cmc"] += 1

    async def run(self):
        """Async generator of CmcRecords; returns when the source reaches end of stream."""
        stream = FrameStream(self.source, self.clock)
        attempt = 0

        try:
            while not stream.exhausted:
                scan = await self.receiver.scan(stream, self.cfg.probe_duration_s)
                if not scan and stream.exhausted:
                    break
                await self.move_to(SessionPhase.PROBING, f"{len(scan)} candidate channels")

                try:
                    locked = await select_channel(
                        scan, self.cfg, self.probe_function(stream), state=self.state)
                except NoProviderFound as error:
                    attempt += 1
                    await self.move_to(SessionPhase.RESTARTING, str(error))
                    if stream.exhausted:
                        break
                    await self.receiver.backoff(stream, attempt, duration=self.cfg.probe_duration_s,
                                                on_message=self.note_unlocked)
                    await self.move_to(SessionPhase.SCANNING, f"retry {attempt}")
                    continue

                attempt = 0
                await self.move_to(SessionPhase.LOCKED,
                                   f"ARFCN {locked.arfcn} {locked.si3.mcc}-{locked.si3.mnc} "
                                   f"LAC {locked.si3.lac} CID {locked.si3.cell_id}")
                self.state.locked = locked

                async for record in self.ingest(stream, locked):
                    yield record

                if self.restart_reason is None:
                    break

                self.stats["restarts"] += 1
                await self.move_to(SessionPhase.RESTARTING, self.restart_reason)
                if self.cfg.restart_mode == "exit":
                    raise WatchdogRestart(self.restart_reason)
                await self.move_to(SessionPhase.SCANNING, "rescan")
        finally:
            await stream.close()
            await self.receiver.close()
            self.logger.info(f"Monitor stopped: {self.stats}")

    def probe_function(self, stream):
        async def probe(arfcn, duration):
            return await self.receiver.probe(stream, arfcn, duration, on_message=self.note_unlocked)
        return probe

    async def ingest(self, stream, locked):
        """Locked phase: the ingestion loop runs here, the watchdog as a separate task."""
        counter = Si3Counter()
        self.restart_reason = None
        tasks = TaskHandler.start_tasks([("watchdog", self.watchdog(counter))])
        timeout = 1.0 if self.source.live else None

        try:
            while True:
                item = await stream.next(timeout=timeout)
                if self.restart_reason is not None:
                    if item is not None:
                        stream.push_back(item)
                    return
                if item is None:
                    if stream.ended:
                        return
                    continue

                timestamp, frame = item
                if not self.receiver.wants(frame, locked.arfcn):
                    continue
                message = decode_frame(frame)

                if isinstance(message, Si3Info):
                    counter.increment()
                    self.stats["si3"] += 1
                    self.check_identity(locked, message)
                elif isinstance(message, CipherModeCommand):
                    self.stats["cmc"] += 1
                    record = self.make_record(timestamp, frame, message, locked)
                    if self.record_sink is not None:
                        await self.record_sink.write(record)
                    self.stats["records"] += 1
                    yield record
        finally:
            await TaskHandler.stop_tasks(tasks)

    async def watchdog(self, counter):
        cfg = self.cfg
        while True:
            await self.clock.sleep(cfg.watchdog_period_s - cfg.watchdog_window_s)
            counter.swap()
            await self.clock.sleep(cfg.watchdog_window_s)
            count = counter.swap()

            if watchdog_evaluate(count, cfg) is WatchdogAction.RESTART:
                self.restart_reason = (f"watchdog: {count} SI3 in {cfg.watchdog_window_s:g}s "
                                       f"(threshold {cfg.watchdog_threshold})")
                self.logger.warning(self.restart_reason)
                return
            self.logger.debug(f"watchdog: {count} SI3 in {cfg.watchdog_window_s:g}s")

    def check_identity(self, locked, si3):
        if si3 == locked.si3:
            return
        if not matches_provider(si3, self.cfg):
            self.restart_reason = "cell identity changed"
            self.logger.warning(f"{self.restart_reason}: now {si3.mcc}-{si3.mnc}")
            return
        difference = deepdiff.DeepDiff(asdict(locked.si3), asdict(si3)).to_json()
        self.logger.info(f"Cell identity drift on ARFCN {locked.arfcn}: {difference}")

    def make_record(self, timestamp, frame, message, locked):
        if self.last_timestamp is not None and timestamp < self.last_timestamp:
            self.logger.warning(f"Timestamp went backwards ({timestamp} < {self.last_timestamp}), clamping")
            self.stats["clamped"] += 1
            timestamp = self.last_timestamp
        self.last_timestamp = timestamp

        return CmcRecord(
            timestamp_utc=timestamp,
            algo=message.decision.algo,
            mcc=locked.si3.mcc,
            mnc=locked.si3.mnc,
            lac=locked.si3.lac,
            cid=locked.si3.cell_id,
            arfcn=locked.arfcn,
            channel_type=frame.channel_label,
            location_label=self.cfg.location_label,
            provider_label=self.cfg.provider_label,
        )


async def run_monitor(cfg, source, receiver=None, clock=None, record_sink=None, transition_sink=None):
    """Convenience wrapper: stream the CmcRecords of one CipherMonitor run."""
    monitor = CipherMonitor(cfg, source, receiver=receiver, clock=clock,
                            record_sink=record_sink, transition_sink=transition_sink)
    async for record in monitor.run():
        yield record


def parse_capture(source, location_label="unknown", provider_label="unknown", include_nociphering=False):
    """
    Offline extraction without scanning or locking: each CMC is stamped with the latest SI3 seen
    on the same ARFCN. CMCs with no SI3 before them cannot be attributed and are skipped.

    Returns:
        (list of CmcRecord, dict with frames / cmc / si3 / skipped counts)
    """
    cells = {}
    records = []
    cmc = si3 = unattributed = 0

    for timestamp, frame in read_capture(source):
        if frame.uplink_flag:
            continue
        message = decode_frame(frame)

        if isinstance(message, Si3Info):
            si3 += 1
            cells[frame.arfcn] = message
        elif isinstance(message, CipherModeCommand):
            cmc += 1
            cell = cells.get(frame.arfcn)
            if cell is None:
                unattributed += 1
                continue
            if not message.decision.starts_ciphering and not include_nociphering:
                continue
            records.append(CmcRecord(
                timestamp_utc=timestamp,
                algo=message.decision.algo,
                mcc=cell.mcc,
                mnc=cell.mnc,
                lac=cell.lac,
                cid=cell.cell_id,
                arfcn=frame.arfcn,
                channel_type=frame.channel_label,
                location_label=location_label,
                provider_label=provider_label,
            ))

    counters = source.counters
    stats = {
        "frames": counters.frames,
        "cmc": cmc,
        "si3": si3,
        "skipped": counters.malformed + counters.filtered_out + unattributed,
    }
    return records, stats
