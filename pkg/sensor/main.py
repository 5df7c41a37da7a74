import sys
import json
import signal
import asyncio
from zoneinfo import ZoneInfo, ZoneInfoNotFoundError
from utils.config import Config
from utils.logger import Logger
from utils.argument_parser import ArgumentParser
from utils.errors import CipherError, ConfigError, SinkWriteError, ToolkitError
from utils.capture import PcapFile, UdpListener, open_source
from utils.records import RecordSink, TransitionSink, write_records
from utils.task_handler import SimulatedClock, WallClock
from utils.radio import build_receiver
from utils.band_plan import arfcn_to_downlink_hz, arfcn_to_uplink_hz, downlink_hz_to_arfcn
from utils.a5 import (A5State, BURST_BITS, FrameCount, SessionKey, a5_init, a5_keystream, bytes_to_bits,
                      count_from_fn, keystream_bytes, recover_kc, recover_keystream)
from utils import analytics
from cipher_monitor import CipherMonitor, parse_capture

logging = Logger()


async def monitor_session(sensor_cfg):
    """
    Runs one CipherMonitor against the configured source until end of stream, SIGTERM or an
    error. Records and transitions are flushed on the way out in every case.
    """
    source = open_source(sensor_cfg.source, port=sensor_cfg.gsmtap_port)
    clock = WallClock() if source.live else SimulatedClock()
    receiver = build_receiver(sensor_cfg, source, clock)
    record_sink = RecordSink(sensor_cfg.log_path)
    transition_sink = TransitionSink(sensor_cfg.transitions_path) if sensor_cfg.transitions_path else None
    monitor = CipherMonitor(sensor_cfg, source, receiver=receiver, clock=clock,
                            record_sink=record_sink, transition_sink=transition_sink)

    loop = asyncio.get_running_loop()
    task = asyncio.current_task()
    try:
        loop.add_signal_handler(signal.SIGTERM, task.cancel)
    except (NotImplementedError, RuntimeError):
        logging.debug("SIGTERM handler not available on this platform")

    try:
        await record_sink.open()
        async for record in monitor.run():
            logging.debug(f"{record.algo_label} on ARFCN {record.arfcn} ({record.channel_type})")
    except asyncio.CancelledError:
        logging.info("Termination requested, flushing logs")
    finally:
        if isinstance(source, UdpListener):
            source.stop()
        await record_sink.close()
        if transition_sink is not None:
            await transition_sink.close()
        try:
            loop.remove_signal_handler(signal.SIGTERM)
        except (NotImplementedError, RuntimeError):
            pass

    logging.info(f"{record_sink.written} records written to {sensor_cfg.log_path}")
    return monitor.stats


def run_monitor_command(arguments, config):
    sensor_cfg = config.sensor_config()
    try:
        asyncio.run(monitor_session(sensor_cfg))
    except KeyboardInterrupt:
        logging.info("Interrupted")
    return 0


def run_parse_command(arguments, config):
    capture = arguments.args.capture
    if capture.startswith(("pcap:", "replay:", "udp:")):
        source = open_source(capture, port=config["gsmtap_port"])
    else:
        source = PcapFile(capture, port=config["gsmtap_port"])
    if source.live:
        raise ConfigError("parse reads capture files only; use monitor for live sources")

    records, stats = parse_capture(source, location_label=config["location"], provider_label=config["provider"],
                                   include_nociphering=config["include_nociphering"])

    if arguments.args.out:
        try:
            with open(arguments.args.out, "w", encoding="utf-8", newline="") as out:
                write_records(records, out, arguments.args.format)
        except OSError as e:
            raise SinkWriteError(f"Unable to write {arguments.args.out}: {e}") from e
    else:
        write_records(records, sys.stdout, arguments.args.format)

    print(" ".join(f"{key}={value}" for key, value in stats.items()), file=sys.stderr)
    return 0


def run_analyze_command(arguments, config):
    paths = arguments.args.records
    if not paths:
        raise ConfigError("analyze needs at least one --records file")

    timezone = config["timezone"] or "UTC"
    try:
        ZoneInfo(timezone)
    except (ZoneInfoNotFoundError, ValueError) as e:
        raise ConfigError(f"Unknown time zone '{timezone}'") from e

    include = config["include_nociphering"]
    dataset = analytics.CampaignDataset.load(paths, timezone=timezone)
    analytics.export_figures(dataset, arguments.args.out, include_nociphering=include)
    sys.stdout.write(analytics.provider_means_table(dataset, include_nociphering=include))
    return 0


def frame_count(args):
    if args.count is not None:
        try:
            return FrameCount(int(args.count, 16))
        except ValueError as e:
            raise CipherError(f"COUNT is not hex: '{args.count}'") from e
    return count_from_fn(args.fn)


def parse_hex(text, name):
    try:
        return bytes.fromhex(text.removeprefix("0x"))
    except ValueError as e:
        raise CipherError(f"{name} is not an even-length hex string: '{text}'") from e


def run_a5_command(arguments, config):
    args = arguments.args

    if args.a5_command == "keystream":
        state = a5_init(SessionKey.from_hex(args.kc), frame_count(args))
        bits = a5_keystream(state)
        result = {
            "state": state.hex(),
            "downlink": keystream_bytes(bits[:BURST_BITS]).hex(),
            "uplink": keystream_bytes(bits[BURST_BITS:]).hex(),
        }
    elif args.a5_command == "recover":
        kc = recover_kc(A5State.from_hex(args.state), frame_count(args))
        result = {"kc": kc.hex()}
    else:
        ciphertext, plaintext = parse_hex(args.ct, "ciphertext"), parse_hex(args.pt, "plaintext")
        keystream = recover_keystream(bytes_to_bits(ciphertext), bytes_to_bits(plaintext))
        result = {"keystream": keystream_bytes(keystream).hex()}

    print(json.dumps(result))
    return 0


def run_arfcn_command(arguments, config):
    args = arguments.args
    if args.arfcn_command == "to-freq":
        print(arfcn_to_uplink_hz(args.arfcn) if args.uplink else arfcn_to_downlink_hz(args.arfcn))
    else:
        print(downlink_hz_to_arfcn(args.frequency))
    return 0


COMMANDS = {
    "monitor": run_monitor_command,
    "parse": run_parse_command,
    "analyze": run_analyze_command,
    "a5": run_a5_command,
    "arfcn": run_arfcn_command,
}


def main(argv=None):
    """Exit codes: 0 success, 2 usage/config, 3 source/I-O, 4 data corruption."""
    try:
        arguments = ArgumentParser(argv)
    except SystemExit as exit_request:
        return exit_request.code

    args = arguments.args
    try:
        config = Config(flags=arguments.config_flags(), config_file=args.config)
        # only the long-running monitor keeps a log file; one-shot commands log to stderr
        log_dir = config["log_dir"] if args.command == "monitor" else None
        logging.configure(log_level=config["log_level"], filename_prefix='gsm_monitor',
                          output_dir=log_dir, days_to_keep=10)
        return COMMANDS[args.command](arguments, config)

    except ConfigError as error:
        args.subparser.print_usage(sys.stderr)
        print(f"error: {error}", file=sys.stderr)
        return error.exit_code
    except ToolkitError as error:
        logging.error(f"{type(error).__name__}: {error}")
        return error.exit_code


if __name__ == '__main__':
    sys.exit(main())
