import random
import shlex
import asyncio
from utils.logger import Logger
from utils.errors import SourceUnavailable
from utils.band_plan import ScanEntry, ScanResult, arfcn_to_downlink_hz, is_egsm_arfcn, parse_scan_output
from utils.um_parser import Si3Info, decode_frame


class Receiver:
    """
    What the monitor needs from the radio side: a frequency scan, tuning to one ARFCN, a probe
    for the SI3 broadcast there and a pause between failed attempts.
    """
    frames_carry_arfcn = True

    def __init__(self, clock):
        self.clock = clock
        self.logger = Logger()
        self.tuned_at = None
        self.stale = 0

    async def scan(self, stream, duration):
        raise NotImplementedError

    async def tune(self, arfcn):
        pass

    async def backoff(self, stream, attempt, duration=None, on_message=None):
        pass

    async def close(self):
        pass

    def wants(self, frame, arfcn):
        if frame.uplink_flag:
            return False
        return not self.frames_carry_arfcn or frame.arfcn == arfcn

    async def probe(self, stream, arfcn, duration, on_message=None):
        """
        Listen on `arfcn` for `duration` seconds (stream time) and return the first SI3 seen,
        or None. Every other decoded message is handed to `on_message(ts, frame, message)`.
        """
        await self.tune(arfcn)
        started = None

        while True:
            timeout = None
            if stream.source.live:
                started = self.clock.now() if started is None else started
                timeout = duration - (self.clock.now() - started)
                if timeout <= 0:
                    return None

            item = await stream.next(timeout=timeout)
            if item is None:
                if stream.ended or stream.source.live:
                    return None
                continue

            timestamp, frame = item
            if self.tuned_at is not None and timestamp < self.tuned_at:
                # queued before the retune, so it belongs to the previous channel
                self.stale += 1
                continue
            if started is None:
                started = timestamp
            if not stream.source.live and timestamp - started > duration:
                stream.push_back(item)
                return None
            if not self.wants(frame, arfcn):
                continue

            message = decode_frame(frame)
            if isinstance(message, Si3Info):
                return message
            if message is not None and on_message is not None:
                on_message(timestamp, frame, message)


class StreamReceiver(Receiver):
    """
    Receiver for captures and plain GSMTAP feeds: the "scan" is a look at which downlink ARFCNs
    show up during the first `duration` seconds; power is the strongest signal level reported
    for each, converted from dBm to milliwatts. The scanned frames are pushed back for probing.
    """

    async def scan(self, stream, duration):
        seen, powers, first = [], {}, None

        while True:
            item = await stream.next()
            if item is None:
                break
            timestamp, frame = item
            if first is None:
                first = timestamp
            if timestamp - first > duration:
                seen.append(item)
                break
            seen.append(item)

            if frame.uplink_flag or not is_egsm_arfcn(frame.arfcn):
                continue
            power = 10 ** (frame.signal_dbm / 10)
            powers[frame.arfcn] = max(power, powers.get(frame.arfcn, 0.0))

        stream.push_back_all(seen)
        entries = [ScanEntry(arfcn=arfcn, downlink_freq_hz=arfcn_to_downlink_hz(arfcn), power=power)
                   for arfcn, power in powers.items()]
        self.logger.info(f"Stream scan over {len(seen)} frames found ARFCNs {sorted(powers)}")
        return ScanResult(entries=entries)

    async def backoff(self, stream, attempt, duration=None, on_message=None):
        """Skip ahead one scan window so the next attempt looks at fresh traffic."""
        duration = duration if duration is not None else 10.0
        first = None
        while True:
            item = await stream.next()
            if item is None:
                return
            timestamp, frame = item
            if first is None:
                first = timestamp
            if timestamp - first > duration:
                stream.push_back(item)
                return
            if on_message is not None and not frame.uplink_flag:
                message = decode_frame(frame)
                if message is not None:
                    on_message(timestamp, frame, message)


async def run_command(argv):
    try:
        process = await asyncio.create_subprocess_exec(*argv, stdout=asyncio.subprocess.PIPE,
                                                       stderr=asyncio.subprocess.PIPE)
    except OSError as e:
        raise SourceUnavailable(f"Unable to run {argv[0]}: {e}") from e

    stdout, stderr = await process.communicate()
    if process.returncode != 0:
        raise SourceUnavailable(f"{argv[0]} exited with {process.returncode}: {stderr.decode(errors='replace').strip()}")
    return stdout.decode(errors='replace')


class KalibrateScanner:
    def __init__(self, command="kal -s EGSM"):
        self.argv = shlex.split(command)

    async def run(self):
        output = await run_command(self.argv)
        result = parse_scan_output(output)
        Logger.info(f"{self.argv[0]} reported {len(result)} channels ({result.ignored_lines} lines ignored)")
        return result


class GrgsmReceiver(Receiver):
    """
    SDR receiver: scans with kalibrate, then runs one gr-gsm live monitor per tuned ARFCN which
    feeds GSMTAP to the UDP listener. The scanner and the demodulator share the dongle, so the
    demodulator is stopped before each scan.
    """
    frames_carry_arfcn = False

    def __init__(self, clock, scanner=None, command="grgsm_livemon_headless",
                 base_wait=10, max_wait=600):
        super().__init__(clock)
        self.scanner = scanner or KalibrateScanner()
        self.argv = shlex.split(command)
        self.base_wait = base_wait
        self.max_wait = max_wait
        self.process = None

    async def scan(self, stream, duration):
        await self.stop_demodulator()
        return await self.scanner.run()

    async def tune(self, arfcn):
        await self.stop_demodulator()
        frequency = arfcn_to_downlink_hz(arfcn)
        argv = [*self.argv, "-f", str(frequency)]
        try:
            self.process = await asyncio.create_subprocess_exec(*argv, stdout=asyncio.subprocess.DEVNULL,
                                                                stderr=asyncio.subprocess.DEVNULL)
        except OSError as e:
            raise SourceUnavailable(f"Unable to start {argv[0]}: {e}") from e
        self.tuned_at = self.clock.now()
        self.logger.info(f"Tuned to ARFCN {arfcn} ({frequency / 1e6:.1f} MHz), pid {self.process.pid}")

    async def stop_demodulator(self):
        if self.process is None:
            return
        if self.process.returncode is None:
            self.process.terminate()
            try:
                await asyncio.wait_for(self.process.wait(), timeout=5)
            except asyncio.TimeoutError:
                self.process.kill()
                await self.process.wait()
        self.process = None

    def backoff_delay(self, attempt):
        wait_time = min(self.base_wait * (6 ** (attempt - 1)), self.max_wait)  # 10s, 60s, 360s, capped
        jitter = random.uniform(0, 0.1 * wait_time)  # 10% jitter
        return wait_time + jitter

    async def backoff(self, stream, attempt, duration=None, on_message=None):
        total_wait = self.backoff_delay(attempt)
        self.logger.info(f"Rescanning in {total_wait:.1f} seconds... (Attempt {attempt})")
        await self.clock.sleep(total_wait)

    async def close(self):
        await self.stop_demodulator()


def build_receiver(cfg, source, clock):
    """Live UDP sources drive the SDR tools; everything else is scanned from the stream itself."""
    if source.live and cfg.scan_command:
        return GrgsmReceiver(clock, scanner=KalibrateScanner(cfg.scan_command), command=cfg.receiver_command)
    return StreamReceiver(clock)

