import argparse


class ArgumentParser:
    def __init__(self, argv=None):
        self.parser = self.build_parser()
        self.args = self.parser.parse_args(argv)

    @staticmethod
    def build_parser():
        parser = argparse.ArgumentParser(prog='gsm-monitor', description='GSM cipher usage monitoring toolkit')
        parser.add_argument('-v', '--verbose', action='store_true', help='Enable verbose logging')
        parser.add_argument('--config', help='TOML config file (default: $GCW_CONFIG)')
        parser.add_argument('--log-dir', dest='log_dir', help='Directory for rotating log files')
        subcommands = parser.add_subparsers(dest='command', required=True)

        monitor = subcommands.add_parser('monitor', help='Scan, lock on a provider and log Cipher Mode Commands')
        monitor.add_argument('--mcc', help='Target mobile country code (3 digits)')
        monitor.add_argument('--mnc', help='Target mobile network code (2-3 digits)')
        monitor.add_argument('--source', help='udp:PORT | pcap:PATH | replay:PATH')
        monitor.add_argument('--log', help='CMC record log (JSON Lines)')
        monitor.add_argument('--transitions', help='Session transition log (default: <log>.sessions.jsonl)')
        monitor.add_argument('--location', help='Location label stamped on every record')
        monitor.add_argument('--provider', help='Provider label stamped on every record')
        monitor.add_argument('--port', dest='gsmtap_port', type=int, help='GSMTAP UDP port')
        monitor.add_argument('--restart-mode', dest='restart_mode', choices=['in-process', 'exit'])
        monitor.add_argument('--probe-duration', dest='probe_duration', type=float, help='Seconds per probed channel')
        monitor.add_argument('--watchdog-period', dest='watchdog_period', type=float)
        monitor.add_argument('--watchdog-window', dest='watchdog_window', type=float)
        monitor.add_argument('--watchdog-threshold', dest='watchdog_threshold', type=int)
        monitor.set_defaults(subparser=monitor)

        parse = subcommands.add_parser('parse', help='Extract CMC records from a capture file')
        parse.add_argument('capture', help='pcap file (or pcap:PATH / replay:PATH)')
        parse.add_argument('--out', help='Output file (default: stdout)')
        parse.add_argument('--format', choices=['jsonl', 'csv'], default='jsonl')
        parse.add_argument('--port', dest='gsmtap_port', type=int, help='GSMTAP UDP port')
        parse.add_argument('--location', help='Location label (default: unknown)')
        parse.add_argument('--provider', help='Provider label (default: unknown)')
        parse.add_argument('--include-nociphering', dest='include_nociphering', action='store_true', default=None)
        parse.set_defaults(subparser=parse)

        analyze = subcommands.add_parser('analyze', help='Campaign statistics and figure data')
        analyze.add_argument('--records', nargs='*', default=[], help='Record logs (.jsonl / .json / .csv)')
        analyze.add_argument('--out', default='../data/analysis', help='Output directory')
        analyze.add_argument('--timezone', help='Civil time zone for hourly buckets (default: UTC)')
        analyze.add_argument('--include-nociphering', dest='include_nociphering', action='store_true', default=None)
        analyze.set_defaults(subparser=analyze)

        a5 = subcommands.add_parser('a5', help='A5/1 laboratory')
        a5_commands = a5.add_subparsers(dest='a5_command', required=True)

        keystream = a5_commands.add_parser('keystream', help='Keystream for a session key and frame')
        keystream.add_argument('--kc', required=True, help='Session key, 1-16 hex digits')
        frame = keystream.add_mutually_exclusive_group(required=True)
        frame.add_argument('--fn', type=int, help='TDMA frame number')
        frame.add_argument('--count', help='22-bit COUNT as hex')
        keystream.set_defaults(subparser=keystream)

        recover = a5_commands.add_parser('recover', help='Session key from the state after key loading')
        recover.add_argument('--state', required=True, help='64-bit packed register state, hex')
        frame = recover.add_mutually_exclusive_group(required=True)
        frame.add_argument('--fn', type=int, help='TDMA frame number')
        frame.add_argument('--count', help='22-bit COUNT as hex')
        recover.set_defaults(subparser=recover)

        xor = a5_commands.add_parser('xor', help='Keystream from known plaintext (or the reverse)')
        xor.add_argument('--ct', required=True, help='Ciphertext, hex')
        xor.add_argument('--pt', required=True, help='Plaintext, hex')
        xor.set_defaults(subparser=xor)

        arfcn = subcommands.add_parser('arfcn', help='E-GSM 900 channel arithmetic')
        arfcn_commands = arfcn.add_subparsers(dest='arfcn_command', required=True)
        to_freq = arfcn_commands.add_parser('to-freq', help='ARFCN to downlink Hz')
        to_freq.add_argument('arfcn', type=int)
        to_freq.add_argument('--uplink', action='store_true', help='Print the uplink frequency instead')
        to_freq.set_defaults(subparser=to_freq)
        from_freq = arfcn_commands.add_parser('from-freq', help='Downlink Hz to ARFCN')
        from_freq.add_argument('frequency', type=int)
        from_freq.set_defaults(subparser=from_freq)

        return parser

    def config_flags(self):
        """The parsed options that map onto Config keys (unset ones are None)."""
        args = vars(self.args)
        flags = {key: args.get(key) for key in (
            'mcc', 'mnc', 'source', 'log', 'transitions', 'location', 'provider', 'gsmtap_port',
            'restart_mode', 'probe_duration', 'watchdog_period', 'watchdog_window',
            'watchdog_threshold', 'timezone', 'log_dir', 'include_nociphering')}
        if self.args.verbose:
            flags['log_level'] = 4
        return flags
