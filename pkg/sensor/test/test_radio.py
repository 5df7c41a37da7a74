import os
import asyncio
import pytest
from utils.config import SensorConfig
from utils.errors import SourceUnavailable
from utils.capture import CaptureSource, FrameStream, PcapFile, ScriptedReplay, UdpListener
from utils.gsmtap import ChannelType, encode_gsmtap
from utils.task_handler import SimulatedClock
from utils.um_parser import CipherModeCommand
from utils.radio import GrgsmReceiver, KalibrateScanner, StreamReceiver, build_receiver, run_command
from frame_factory import cmc_frame, cmc_l3, lapdm_b_frame, make_frame, si3_frame

FIXTURE = os.path.join(os.path.dirname(__file__), "..", "..", "data", "fixtures", "kalibrate_scan.txt")


def test_backoff_grows_six_fold_and_is_capped():
    receiver = GrgsmReceiver(SimulatedClock(), base_wait=10, max_wait=600)
    for attempt, base in [(1, 10), (2, 60), (3, 360), (4, 600), (9, 600)]:
        delay = receiver.backoff_delay(attempt)
        assert base <= delay <= base * 1.1


def test_scanner_output_is_parsed():
    result = asyncio.run(KalibrateScanner(f"cat {FIXTURE}").run())
    assert len(result) == 6
    assert result.by_power()[0].arfcn == 20


def test_failing_tools_are_source_errors():
    with pytest.raises(SourceUnavailable):
        asyncio.run(run_command(["/nonexistent/kal", "-s", "EGSM"]))
    with pytest.raises(SourceUnavailable):
        asyncio.run(run_command(["false"]))


def test_receiver_choice():
    cfg = SensorConfig(target_mcc="262", target_mnc="01")
    clock = SimulatedClock()
    assert isinstance(build_receiver(cfg, UdpListener(), clock), GrgsmReceiver)
    assert isinstance(build_receiver(cfg, PcapFile("x.pcap"), clock), StreamReceiver)
    no_scanner = SensorConfig(target_mcc="262", target_mnc="01", scan_command="")
    assert isinstance(build_receiver(no_scanner, UdpListener(), clock), StreamReceiver)


def test_demodulator_is_started_per_channel_and_stopped():
    async def scenario():
        receiver = GrgsmReceiver(SimulatedClock(), command="sh -c 'sleep 30'")
        await receiver.tune(20)
        running = receiver.process.returncode is None
        await receiver.close()
        return running, receiver.process

    running, process = asyncio.run(scenario())
    assert running
    assert process is None


def test_stream_scan_ranks_downlink_channels_and_keeps_frames():
    items = [
        (1.0, si3_frame(arfcn=20, signal_dbm=-80)),
        (1.5, si3_frame(arfcn=30, signal_dbm=-60)),
        (2.0, make_frame(lapdm_b_frame(cmc_l3(0x1)), ChannelType.SDCCH8, arfcn=40, signal_dbm=-20, uplink=True)),
        (3.0, cmc_frame(0x5, arfcn=20, signal_dbm=-50)),
        (30.0, si3_frame(arfcn=50, signal_dbm=-10)),
    ]

    async def scenario():
        stream = FrameStream(ScriptedReplay.from_frames(items), SimulatedClock())
        scan = await StreamReceiver(stream.clock).scan(stream, 10)
        replayed = [await stream.next() for _ in items]
        return scan, replayed

    scan, replayed = asyncio.run(scenario())
    assert [entry.arfcn for entry in scan.by_power()] == [20, 30]
    assert [ts for ts, _ in replayed] == [ts for ts, _ in items]


def test_probe_hands_other_messages_over_and_gives_up_after_its_window():
    items = [(0.0, cmc_frame(0x1)), (1.0, cmc_frame(0x5)), (20.0, si3_frame())]
    seen = []

    async def scenario():
        stream = FrameStream(ScriptedReplay.from_frames(items), SimulatedClock())
        receiver = StreamReceiver(stream.clock)
        missed = await receiver.probe(stream, 20, 10, on_message=lambda ts, frame, message: seen.append(message))
        found = await receiver.probe(stream, 20, 10)
        return missed, found

    missed, found = asyncio.run(scenario())
    assert missed is None
    assert found.mcc == "262"
    assert len(seen) == 2 and all(isinstance(message, CipherModeCommand) for message in seen)


class QueuedFeed(CaptureSource):
    """Live source whose datagrams are already waiting in the socket queue."""
    live = True

    def __init__(self, frames):
        super().__init__()
        self.items = [(ts, encode_gsmtap(frame)) for ts, frame in frames]

    async def datagrams(self):
        for item in self.items:
            yield item


def test_frames_queued_before_a_retune_are_not_attributed_to_the_new_channel():
    # gr-gsm frames carry no usable ARFCN, only the arrival time tells channels apart
    items = [(1.0, si3_frame(mnc="02")), (2.0, si3_frame(mnc="02")), (6.0, si3_frame(mnc="01"))]

    async def scenario():
        clock = SimulatedClock()
        stream = FrameStream(QueuedFeed(items), clock)
        receiver = GrgsmReceiver(clock, command="sh -c 'sleep 30'")
        try:
            first = await receiver.probe(stream, 30, 10)
            await clock.advance_to(5.0)  # demodulator restart takes a while
            second = await receiver.probe(stream, 40, 10)
        finally:
            await receiver.close()
        return first, second, receiver.stale

    first, second, stale = asyncio.run(scenario())
    assert first.mnc == "02"
    assert second.mnc == "01"
    assert stale == 1
