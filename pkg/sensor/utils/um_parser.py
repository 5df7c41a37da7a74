"""
Downlink Um decoding: L2 framing (pseudo-length on BCCH/CCCH, LAPDm format B on SDCCH/SACCH)
and the two Radio Resource messages the sensor cares about, System Information Type 3 and
Cipher Mode Command (3GPP TS 44.018 / 44.006 layouts). Everything here is pure.
"""
from enum import IntEnum
from typing import Optional, Union
from dataclasses import dataclass
from utils.errors import BadBcd, BadLength, L2Error, MalformedHeader, RRError, Truncated, UnsupportedChannel

SIGNALLING_FRAME_LEN = 23
PADDING_OCTET = 0x2B
SACCH_L1_HEADER_LEN = 2

PD_RADIO_RESOURCE = 0x06
MT_SYSTEM_INFORMATION_3 = 0x1B
MT_CIPHER_MODE_COMMAND = 0x35


class CipherAlgo(IntEnum):
    A5_1 = 1
    A5_2 = 2
    A5_3 = 3
    A5_4 = 4
    A5_5 = 5
    A5_6 = 6
    A5_7 = 7
    A5_8 = 8  # identifier 0b111, reserved by the standard

    @property
    def label(self):
        return f"A5/{int(self)}"

    @classmethod
    def from_label(cls, label):
        if not label.startswith("A5/") or not label[3:].isdigit():
            raise ValueError(f"Unknown algorithm label '{label}'")
        return cls(int(label[3:]))


NO_CIPHERING_LABEL = "none"


@dataclass(frozen=True)
class CipherDecision:
    """algo is None exactly when the command says 'no ciphering' (A5/0)."""
    algo: Optional[CipherAlgo]
    cipher_response: int

    @property
    def starts_ciphering(self):
        return self.algo is not None

    @property
    def label(self):
        return self.algo.label if self.algo is not None else NO_CIPHERING_LABEL


@dataclass(frozen=True)
class Si3Info:
    cell_id: int
    mcc: str
    mnc: str
    lac: int


@dataclass(frozen=True)
class CipherModeCommand:
    decision: CipherDecision


@dataclass(frozen=True)
class OtherMessage:
    protocol_discriminator: int
    message_type: Optional[int]


RRMessage = Union[Si3Info, CipherModeCommand, OtherMessage]


@dataclass(frozen=True)
class BcchPseudoLength:
    pseudo_length: int
    l3: bytes
    padding: bytes

    @property
    def padding_is_canonical(self):
        return all(octet == PADDING_OCTET for octet in self.padding)


@dataclass(frozen=True)
class LapdmB:
    address: int
    control: int
    length_indicator: int
    l3: bytes
    padding: bytes
    l1_header: bytes = b""

    @property
    def more_bit(self):
        return bool(self.length_indicator & 0x02)

    @property
    def el_bit(self):
        return bool(self.length_indicator & 0x01)

    @property
    def padding_is_canonical(self):
        return all(octet == PADDING_OCTET for octet in self.padding)


L2Payload = Union[BcchPseudoLength, LapdmB]


def parse_l2(frame):
    """
    Split a 23-octet signalling frame into its L3 message and fill octets.

    Raises:
        BadLength: payload is not 23 octets.
        MalformedHeader: pseudo-length flag bits wrong, or declared L3 length overruns the frame.
        UnsupportedChannel: channel type carries neither format.
    """
    payload = frame.payload
    if len(payload) != SIGNALLING_FRAME_LEN:
        raise BadLength(f"signalling frame of {len(payload)} octets, expected {SIGNALLING_FRAME_LEN}")

    channel = frame.channel_type
    if channel.is_common:
        return _parse_pseudo_length(payload)
    if channel.is_dedicated:
        offset = SACCH_L1_HEADER_LEN if channel.is_sacch else 0
        return _parse_lapdm_b(payload, offset)
    raise UnsupportedChannel(f"no L2 framing for channel {frame.channel_label}")


def _parse_pseudo_length(payload):
    octet = payload[0]
    if octet & 0x03 != 0x01:
        raise MalformedHeader(f"L2 pseudo length octet 0x{octet:02x} lacks the 0b01 flag bits")
    pseudo_length = octet >> 2
    if 1 + pseudo_length > len(payload):
        raise MalformedHeader(f"L2 pseudo length {pseudo_length} overruns the frame")
    return BcchPseudoLength(pseudo_length=pseudo_length,
                            l3=bytes(payload[1:1 + pseudo_length]),
                            padding=bytes(payload[1 + pseudo_length:]))


def _parse_lapdm_b(payload, offset):
    start = offset + 3
    address, control, length_indicator = payload[offset], payload[offset + 1], payload[offset + 2]
    l3_length = length_indicator >> 2
    if start + l3_length > len(payload):
        raise MalformedHeader(f"LAPDm length {l3_length} overruns the frame")
    return LapdmB(address=address, control=control, length_indicator=length_indicator,
                  l3=bytes(payload[start:start + l3_length]),
                  padding=bytes(payload[start + l3_length:]),
                  l1_header=bytes(payload[:offset]))


def decode_cipher_mode_setting(nibble):
    """SC bit (bit 1) clear means no ciphering; otherwise bits 4..2 + 1 name the algorithm."""
    nibble &= 0x0F
    if not nibble & 0x01:
        return None
    return CipherAlgo(((nibble >> 1) & 0x07) + 1)


def decode_lai(octets):
    """Location Area Identification: BCD MCC/MNC (0xF filler for 2-digit MNCs) + 16-bit LAC."""
    octets = bytes(octets)
    if len(octets) != 5:
        raise Truncated(f"LAI needs 5 octets, got {len(octets)}")

    mnc3 = octets[1] >> 4
    digits = [octets[0] & 0x0F, octets[0] >> 4, octets[1] & 0x0F, octets[2] & 0x0F, octets[2] >> 4]
    for digit in digits:
        if digit > 9:
            raise BadBcd(f"non-decimal nibble 0x{digit:x} in LAI {octets.hex()}")
    if mnc3 > 9 and mnc3 != 0x0F:
        raise BadBcd(f"non-decimal nibble 0x{mnc3:x} in LAI {octets.hex()}")

    mcc = "".join(str(digit) for digit in digits[:3])
    mnc = "".join(str(digit) for digit in digits[3:])
    if mnc3 != 0x0F:
        mnc += str(mnc3)
    lac = (octets[3] << 8) | octets[4]
    return mcc, mnc, lac


def encode_lai(mcc, mnc, lac):
    if len(mcc) != 3 or len(mnc) not in (2, 3) or not (mcc + mnc).isdigit():
        raise BadBcd(f"cannot encode MCC '{mcc}' / MNC '{mnc}'")
    mnc3 = int(mnc[2]) if len(mnc) == 3 else 0x0F
    return bytes([
        int(mcc[1]) << 4 | int(mcc[0]),
        mnc3 << 4 | int(mcc[2]),
        int(mnc[1]) << 4 | int(mnc[0]),
        (lac >> 8) & 0xFF,
        lac & 0xFF,
    ])


def parse_rr(l3):
    """
    Classify one L3 message. Only skip indicator 0 Radio Resource messages become Si3Info or
    CipherModeCommand; everything else is OtherMessage with the raw values.

    Raises:
        Truncated: empty input, or shorter than the fixed part this parser decodes.
        BadBcd: invalid digits in the SI3 LAI.
    """
    l3 = bytes(l3)
    if not l3:
        raise Truncated("empty L3 message")

    protocol_discriminator = l3[0] & 0x0F
    skip_indicator = l3[0] >> 4
    message_type = l3[1] if len(l3) > 1 else None

    if protocol_discriminator != PD_RADIO_RESOURCE or skip_indicator != 0 or message_type is None:
        return OtherMessage(protocol_discriminator, message_type)

    if message_type == MT_SYSTEM_INFORMATION_3:
        if len(l3) < 9:
            raise Truncated(f"SI3 of {len(l3)} octets")
        cell_id = (l3[2] << 8) | l3[3]
        mcc, mnc, lac = decode_lai(l3[4:9])
        return Si3Info(cell_id=cell_id, mcc=mcc, mnc=mnc, lac=lac)

    if message_type == MT_CIPHER_MODE_COMMAND:
        if len(l3) < 3:
            raise Truncated(f"Cipher Mode Command of {len(l3)} octets")
        algo = decode_cipher_mode_setting(l3[2] & 0x0F)
        return CipherModeCommand(CipherDecision(algo=algo, cipher_response=l3[2] >> 4))

    return OtherMessage(protocol_discriminator, message_type)


def decode_frame(frame):
    """parse_l2 + parse_rr for one frame; None when the frame holds no decodable signalling."""
    try:
        return parse_rr(parse_l2(frame).l3)
    except (L2Error, RRError):
        return None
