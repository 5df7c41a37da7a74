import random
import struct
import pytest
from utils.errors import ToolkitError, TooShort, UnsupportedVersion
from utils.gsmtap import ChannelType, GsmtapFrame, PayloadType, encode_gsmtap, parse_gsmtap
from utils.um_parser import decode_frame
from frame_factory import make_frame, si3_frame


def header(version=2, hdr_len=4, type_raw=1, timeslot=0, arfcn=20, signal=-60, snr=20, fn=1234,
           sub_type=0x01, antenna=0, sub_slot=0):
    return struct.pack('!BBBBHbbIBBBB', version, hdr_len, type_raw, timeslot, arfcn, signal, snr, fn,
                       sub_type, antenna, sub_slot, 0)


def test_parse_fields_from_a_bcch_header():
    frame = parse_gsmtap(header() + bytes(23))
    assert frame.version == 2
    assert frame.arfcn == 20
    assert frame.uplink_flag is False
    assert frame.signal_dbm == -60
    assert frame.frame_number == 1234
    assert frame.channel_type is ChannelType.BCCH
    assert frame.payload_type is PayloadType.UM
    assert len(frame.payload) == 23


def test_arfcn_flags_are_split_off():
    frame = parse_gsmtap(header(arfcn=0x4000 | 0x8000 | 975) + bytes(23))
    assert frame.arfcn == 975
    assert frame.uplink_flag is True
    assert frame.pcs_flag is True


def test_longer_header_moves_payload_start():
    raw = header(hdr_len=5) + b"\xAA\xBB\xCC\xDD" + b"\x01\x02"
    frame = parse_gsmtap(raw)
    assert frame.header_len_words == 5
    assert frame.payload == b"\x01\x02"


def test_non_um_type_is_tagged_not_rejected():
    frame = parse_gsmtap(header(type_raw=0x08) + b"\x00")
    assert frame.payload_type is PayloadType.OTHER


def test_unknown_sub_type_keeps_raw_value():
    frame = parse_gsmtap(header(sub_type=0x42) + bytes(23))
    assert frame.channel_type is ChannelType.UNKNOWN
    assert frame.sub_type == 0x42
    assert frame.channel_label == "UNKNOWN(0x42)"


def test_sacch_channel_types():
    assert ChannelType.SACCH_SDCCH8.is_sacch
    assert ChannelType.SACCH_SDCCH8.is_dedicated
    assert not ChannelType.SDCCH8.is_sacch
    assert ChannelType.BCCH.is_common


@pytest.mark.parametrize("raw", [b"", b"\x02", header()[:15]])
def test_short_buffers(raw):
    with pytest.raises(TooShort):
        parse_gsmtap(raw)


@pytest.mark.parametrize("first", [0x02, 0x03, 0x00, 0xFF])
def test_ten_octets_are_too_short_whatever_the_version(first):
    with pytest.raises(TooShort):
        parse_gsmtap(bytes([first]) + bytes(9))


def test_declared_header_longer_than_buffer():
    with pytest.raises(TooShort):
        parse_gsmtap(header(hdr_len=8) + b"\x00")


def test_header_length_below_minimum():
    with pytest.raises(TooShort):
        parse_gsmtap(header(hdr_len=3) + bytes(23))


def test_version_three_is_rejected():
    with pytest.raises(UnsupportedVersion):
        parse_gsmtap(header(version=3) + bytes(23))


def test_parser_errors_are_value_errors():
    with pytest.raises(ValueError):
        parse_gsmtap(b"\x02")


def test_encoded_si3_frame_decodes_end_to_end():
    frame = parse_gsmtap(encode_gsmtap(si3_frame(mcc="001", mnc="01", lac=7, cell_id=42)))
    message = decode_frame(frame)
    assert (message.mcc, message.mnc, message.lac, message.cell_id) == ("001", "01", 7, 42)


def test_randomized_frames_survive_encode_and_parse():
    rng = random.Random(4729)
    channels = list(ChannelType)
    for _ in range(10_000):
        frame = GsmtapFrame(
            version=2,
            header_len_words=rng.choice([4, 4, 4, 5, 6]),
            type_raw=rng.choice([1, 1, 1, 3, 8]),
            timeslot=rng.randrange(8),
            arfcn=rng.randrange(0x4000),
            uplink_flag=rng.random() < 0.2,
            pcs_flag=rng.random() < 0.1,
            signal_dbm=rng.randrange(-128, 128),
            snr_db=rng.randrange(-128, 128),
            frame_number=rng.randrange(2 ** 32),
            sub_type=int(rng.choice(channels)),
            antenna=rng.randrange(256),
            sub_slot=rng.randrange(8),
            payload=bytes(rng.randrange(256) for _ in range(rng.choice([0, 23, 23, 40]))),
        )
        assert parse_gsmtap(encode_gsmtap(frame)) == frame


def test_fuzzed_inputs_only_raise_toolkit_errors():
    rng = random.Random(1)
    valid = encode_gsmtap(make_frame(bytes(23), ChannelType.SDCCH8))
    for _ in range(10_000):
        if rng.random() < 0.5:
            raw = bytes(rng.randrange(256) for _ in range(rng.randrange(0, 48)))
        else:
            raw = bytearray(valid[:rng.randrange(len(valid) + 1)])
            for _ in range(rng.randrange(1, 4)):
                if raw:
                    raw[rng.randrange(len(raw))] = rng.randrange(256)
            raw = bytes(raw)
        try:
            frame = parse_gsmtap(raw)
        except ToolkitError:
            continue
        decode_frame(frame)
