import os
import pytest
from utils.errors import InvalidArfcn
from utils.band_plan import (arfcn_to_downlink_hz, arfcn_to_uplink_hz, downlink_hz_to_arfcn, is_egsm_arfcn,
                             parse_scan_output)

FIXTURE = os.path.join(os.path.dirname(__file__), "..", "..", "data", "fixtures", "kalibrate_scan.txt")


def test_channel_arithmetic():
    assert arfcn_to_downlink_hz(1) == 935_200_000
    assert arfcn_to_downlink_hz(975) == 925_200_000
    assert arfcn_to_downlink_hz(124) == 959_800_000
    assert arfcn_to_downlink_hz(0) == 935_000_000
    assert arfcn_to_uplink_hz(1) == 890_200_000


@pytest.mark.parametrize("arfcn", [125, 500, 512, 885, 974, 1024, -1])
def test_outside_egsm(arfcn):
    with pytest.raises(InvalidArfcn):
        arfcn_to_downlink_hz(arfcn)


def test_every_channel_lies_in_the_downlink_band_and_inverts():
    for arfcn in [*range(0, 125), *range(975, 1024)]:
        frequency = arfcn_to_downlink_hz(arfcn)
        assert 925_200_000 <= frequency <= 959_800_000
        assert downlink_hz_to_arfcn(frequency) == arfcn


def test_from_frequency_off_raster_or_band():
    with pytest.raises(InvalidArfcn):
        downlink_hz_to_arfcn(935_100_000)
    with pytest.raises(InvalidArfcn):
        downlink_hz_to_arfcn(1_805_200_000)


def test_scan_line():
    result = parse_scan_output("\tchan: 20 (939.0MHz - 270Hz)\tpower:   84420.57\n")
    assert len(result) == 1
    entry = result.entries[0]
    assert (entry.arfcn, entry.downlink_freq_hz, entry.power, entry.offset_hz) == (20, 939_000_000, 84420.57, -270.0)


def test_kilohertz_offsets_and_plus_sign():
    entry = parse_scan_output("chan: 1 (935.2MHz + 1.2kHz) power: 10.0").entries[0]
    assert entry.offset_hz == pytest.approx(1200.0)


def test_empty_and_garbage():
    assert len(parse_scan_output("")) == 0
    garbage = parse_scan_output("kal: Scanning for E-GSM-900 base stations.\nfoo\n")
    assert len(garbage) == 0
    assert garbage.ignored_lines == 2


def test_non_egsm_channels_are_ignored():
    result = parse_scan_output("chan: 600 (1815.0MHz - 10Hz) power: 5.0")
    assert len(result) == 0 and result.ignored_lines == 1


def test_captured_scanner_output():
    with open(FIXTURE) as scan:
        result = parse_scan_output(scan.read())
    assert len(result) == 6
    assert all(is_egsm_arfcn(entry.arfcn) for entry in result.entries)
    powers = [entry.power for entry in result.by_power()]
    assert powers == sorted(powers, reverse=True)
    assert result.by_power()[0].arfcn == 20


def test_by_power_is_stable_on_ties():
    result = parse_scan_output("chan: 3 (935.6MHz + 0Hz) power: 5.0\nchan: 1 (935.2MHz + 0Hz) power: 5.0")
    assert [entry.arfcn for entry in result.by_power()] == [3, 1]
