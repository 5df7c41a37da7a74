import random
import pytest
from utils.errors import BadBcd, BadLength, MalformedHeader, ToolkitError, Truncated, UnsupportedChannel
from utils.gsmtap import ChannelType, encode_gsmtap, parse_gsmtap
from utils.um_parser import (BcchPseudoLength, CipherAlgo, CipherDecision, CipherModeCommand, LapdmB, OtherMessage,
                             Si3Info, decode_cipher_mode_setting, decode_frame, decode_lai, encode_lai, parse_l2,
                             parse_rr)
from frame_factory import cmc_frame, cmc_l3, lapdm_b_frame, make_frame, pseudo_length_frame, si3_frame, si3_l3


def test_cipher_mode_setting_table():
    expected = {
        0x0: None, 0x1: CipherAlgo.A5_1, 0x2: None, 0x3: CipherAlgo.A5_2,
        0x4: None, 0x5: CipherAlgo.A5_3, 0x6: None, 0x7: CipherAlgo.A5_4,
        0x8: None, 0x9: CipherAlgo.A5_5, 0xA: None, 0xB: CipherAlgo.A5_6,
        0xC: None, 0xD: CipherAlgo.A5_7, 0xE: None, 0xF: CipherAlgo.A5_8,
    }
    for nibble, algo in expected.items():
        assert decode_cipher_mode_setting(nibble) == algo, hex(nibble)


def test_algorithm_labels():
    assert CipherAlgo.A5_3.label == "A5/3"
    assert CipherAlgo.from_label("A5/4") is CipherAlgo.A5_4
    with pytest.raises(ValueError):
        CipherAlgo.from_label("GEA/3")


def test_lai_with_two_digit_mnc():
    assert decode_lai(bytes([0x62, 0xF2, 0x10, 0x12, 0x34])) == ("262", "01", 0x1234)


def test_lai_with_three_digit_mnc():
    assert decode_lai(bytes([0x13, 0x00, 0x62, 0x00, 0x01])) == ("310", "260", 1)


def test_encode_lai_is_the_inverse_for_both_mnc_lengths():
    assert decode_lai(encode_lai("001", "01", 65535)) == ("001", "01", 65535)
    assert decode_lai(encode_lai("310", "410", 7)) == ("310", "410", 7)


def test_lai_rejects_non_decimal_digits():
    with pytest.raises(BadBcd):
        decode_lai(bytes([0x6A, 0xF2, 0x10, 0x00, 0x01]))
    with pytest.raises(BadBcd):
        decode_lai(bytes([0x62, 0xA2, 0x10, 0x00, 0x01]))


def test_lai_needs_five_octets():
    with pytest.raises(Truncated):
        decode_lai(b"\x62\xF2")


def test_bcch_pseudo_length_split():
    l2 = parse_l2(si3_frame())
    assert isinstance(l2, BcchPseudoLength)
    assert l2.pseudo_length == 18
    assert len(l2.l3) == 18
    assert l2.padding == b"\x2B" * 4
    assert l2.padding_is_canonical


def test_pseudo_length_flag_bits_are_checked():
    payload = bytearray(pseudo_length_frame(si3_l3()))
    payload[0] &= 0xFC
    with pytest.raises(MalformedHeader):
        parse_l2(make_frame(payload, ChannelType.BCCH))


def test_pseudo_length_overrun():
    payload = bytes([(30 << 2) | 1]) + bytes(22)
    with pytest.raises(MalformedHeader):
        parse_l2(make_frame(payload, ChannelType.CCCH))


def test_lapdm_b_on_sdcch():
    l2 = parse_l2(cmc_frame(0x5))
    assert isinstance(l2, LapdmB)
    assert l2.l3 == cmc_l3(0x5)
    assert l2.el_bit and not l2.more_bit
    assert l2.l1_header == b""


def test_sacch_frames_carry_an_l1_header():
    frame = make_frame(lapdm_b_frame(cmc_l3(0x7), sacch_header=b"\x05\x01"), ChannelType.SACCH_SDCCH8)
    l2 = parse_l2(frame)
    assert l2.l1_header == b"\x05\x01"
    assert l2.l3 == cmc_l3(0x7)


def test_l2_needs_23_octets():
    with pytest.raises(BadLength):
        parse_l2(make_frame(bytes(22), ChannelType.BCCH))


def test_traffic_channels_have_no_signalling_framing():
    with pytest.raises(UnsupportedChannel):
        parse_l2(make_frame(bytes(23), ChannelType.TCH_F))


def test_parse_rr_si3():
    message = parse_rr(si3_l3(mcc="262", mnc="07", lac=0x0102, cell_id=0x0304))
    assert message == Si3Info(cell_id=0x0304, mcc="262", mnc="07", lac=0x0102)


def test_parse_rr_cipher_mode_command_keeps_cipher_response():
    message = parse_rr(bytes([0x06, 0x35, 0x15]))
    assert isinstance(message, CipherModeCommand)
    assert message.decision.algo is CipherAlgo.A5_3
    assert message.decision.cipher_response == 1
    assert message.decision.label == "A5/3"


def test_no_ciphering_label():
    message = parse_rr(cmc_l3(0x0))
    assert not message.decision.starts_ciphering
    assert message.decision.label == "none"


def test_other_protocols_and_skip_indicator():
    assert parse_rr(bytes([0x05, 0x18])) == OtherMessage(0x05, 0x18)
    assert isinstance(parse_rr(bytes([0x16, 0x35, 0x01])), OtherMessage)
    assert parse_rr(bytes([0x06, 0x21, 0x00])) == OtherMessage(0x06, 0x21)


@pytest.mark.parametrize("l3", [b"", bytes([0x06, 0x1B, 0x00, 0x01, 0x62]), bytes([0x06, 0x35])])
def test_truncated_messages(l3):
    with pytest.raises(Truncated):
        parse_rr(l3)


def test_decode_frame_swallows_framing_errors():
    assert decode_frame(make_frame(bytes(10), ChannelType.BCCH)) is None
    assert decode_frame(make_frame(bytes(23), ChannelType.TCH_H)) is None
    assert isinstance(decode_frame(cmc_frame(0x1)), CipherModeCommand)


def random_digits(rng, count):
    return "".join(str(rng.randrange(10)) for _ in range(count))


def test_lai_encoding_round_trips_for_random_networks():
    rng = random.Random(262)
    for _ in range(2000):
        mcc, mnc, lac = random_digits(rng, 3), random_digits(rng, rng.choice([2, 3])), rng.randrange(1 << 16)
        octets = encode_lai(mcc, mnc, lac)
        assert decode_lai(octets) == (mcc, mnc, lac)
        assert encode_lai(*decode_lai(octets)) == octets


def test_parse_rr_only_raises_its_own_errors():
    rng = random.Random(44018)
    for _ in range(10_000):
        if rng.random() < 0.5:
            l3 = bytes(rng.randrange(256) for _ in range(rng.randrange(0, 24)))
        else:
            # radio resource header with a random body, mostly SI3 and CMC
            message_type = rng.choice([0x1B, 0x35, rng.randrange(256)])
            l3 = bytes([0x06, message_type]) + bytes(rng.randrange(256) for _ in range(rng.randrange(0, 20)))
        try:
            message = parse_rr(l3)
        except ToolkitError:
            continue
        assert isinstance(message, (Si3Info, CipherModeCommand, OtherMessage))


def test_random_signalling_frames_survive_the_whole_stack():
    rng = random.Random(4729)
    dedicated = [ChannelType.SDCCH, ChannelType.SDCCH4, ChannelType.SDCCH8,
                 ChannelType.SACCH_SDCCH4, ChannelType.SACCH_SDCCH8, ChannelType.SACCH_TCH_F]
    for _ in range(10_000):
        if rng.random() < 0.5:
            expected = Si3Info(cell_id=rng.randrange(1 << 16), mcc=random_digits(rng, 3),
                               mnc=random_digits(rng, rng.choice([2, 3])), lac=rng.randrange(1 << 16))
            payload = pseudo_length_frame(si3_l3(expected.mcc, expected.mnc, expected.lac, expected.cell_id))
            channel = rng.choice([ChannelType.BCCH, ChannelType.CCCH])
        else:
            setting, response = rng.randrange(16), rng.randrange(16)
            expected = CipherModeCommand(CipherDecision(algo=decode_cipher_mode_setting(setting),
                                                        cipher_response=response))
            channel = rng.choice(dedicated)
            header = bytes([rng.randrange(256), rng.randrange(256)]) if channel.is_sacch else None
            payload = lapdm_b_frame(cmc_l3(setting, response), sacch_header=header)

        frame = make_frame(payload, channel, arfcn=rng.randrange(1024), frame_number=rng.randrange(1 << 21))
        assert decode_frame(parse_gsmtap(encode_gsmtap(frame))) == expected
