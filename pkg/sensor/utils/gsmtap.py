import struct
from enum import Enum, IntEnum
from dataclasses import dataclass
from utils.errors import TooShort, UnsupportedVersion

GSMTAP_VERSION = 0x02
GSMTAP_PORT = 4729
GSMTAP_TYPE_UM = 0x01

GSMTAP_ARFCN_F_PCS = 0x8000
GSMTAP_ARFCN_F_UPLINK = 0x4000
GSMTAP_ARFCN_MASK = 0x3FFF

GSMTAP_CHANNEL_ACCH = 0x80

# struct gsmtap_hdr {
#     uint8_t version;       /* version, 0x02 */
#     uint8_t hdr_len;       /* length in number of 32bit words */
#     uint8_t type;          /* see GSMTAP_TYPE_* */
#     uint8_t timeslot;      /* timeslot (0..7 on Um) */
#     uint16_t arfcn;        /* ARFCN + PCS/uplink flags */
#     int8_t signal_dbm;     /* signal level in dBm */
#     int8_t snr_db;         /* signal/noise ratio in dB */
#     uint32_t frame_number; /* GSM Frame Number (FN) */
#     uint8_t sub_type;      /* type of burst/channel */
#     uint8_t antenna_nr;
#     uint8_t sub_slot;      /* sub-slot within timeslot */
#     uint8_t res;
# }
HEADER = struct.Struct('!BBBBHbbIBBBB')


class PayloadType(Enum):
    UM = "Um"
    OTHER = "other"


class ChannelType(IntEnum):
    UNKNOWN = 0x00
    BCCH = 0x01
    CCCH = 0x02
    RACH = 0x03
    AGCH = 0x04
    PCH = 0x05
    SDCCH = 0x06
    SDCCH4 = 0x07
    SDCCH8 = 0x08
    TCH_F = 0x09
    TCH_H = 0x0A
    SACCH_SDCCH = GSMTAP_CHANNEL_ACCH | 0x06
    SACCH_SDCCH4 = GSMTAP_CHANNEL_ACCH | 0x07
    SACCH_SDCCH8 = GSMTAP_CHANNEL_ACCH | 0x08
    SACCH_TCH_F = GSMTAP_CHANNEL_ACCH | 0x09
    SACCH_TCH_H = GSMTAP_CHANNEL_ACCH | 0x0A

    @property
    def is_sacch(self):
        return bool(self & GSMTAP_CHANNEL_ACCH)

    @property
    def is_dedicated(self):
        return self in (ChannelType.SDCCH, ChannelType.SDCCH4, ChannelType.SDCCH8) or self.is_sacch

    @property
    def is_common(self):
        return self in (ChannelType.BCCH, ChannelType.CCCH, ChannelType.PCH, ChannelType.AGCH)


@dataclass(frozen=True)
class GsmtapFrame:
    version: int
    header_len_words: int
    type_raw: int
    timeslot: int
    arfcn: int
    uplink_flag: bool
    signal_dbm: int
    snr_db: int
    frame_number: int
    sub_type: int
    antenna: int
    sub_slot: int
    payload: bytes
    pcs_flag: bool = False

    @property
    def payload_type(self):
        return PayloadType.UM if self.type_raw == GSMTAP_TYPE_UM else PayloadType.OTHER

    @property
    def channel_type(self):
        try:
            return ChannelType(self.sub_type)
        except ValueError:
            return ChannelType.UNKNOWN

    @property
    def channel_label(self):
        """Name used in record logs; unknown sub types keep their raw value."""
        channel = self.channel_type
        if channel is ChannelType.UNKNOWN:
            return f"UNKNOWN(0x{self.sub_type:02x})"
        return channel.name


def parse_gsmtap(raw):
    """
    Decode one GSMTAP v2 datagram. Non-Um payload types are returned tagged, not rejected.

    Raises:
        TooShort: the buffer is shorter than the mandatory 16-octet header or the declared header length.
        UnsupportedVersion: version field is not 2.
    """
    raw = bytes(raw)
    if len(raw) < HEADER.size:
        raise TooShort(f"GSMTAP datagram of {len(raw)} bytes")

    version, header_len_words = raw[0], raw[1]
    if version != GSMTAP_VERSION:
        raise UnsupportedVersion(f"GSMTAP version {version}")

    header_len = header_len_words * 4
    if header_len < HEADER.size or len(raw) < header_len:
        raise TooShort(f"GSMTAP header declares {header_len} bytes, datagram has {len(raw)}")

    (_, _, type_raw, timeslot, arfcn_field, signal_dbm, snr_db,
     frame_number, sub_type, antenna, sub_slot, _) = HEADER.unpack_from(raw, 0)

    return GsmtapFrame(
        version=version,
        header_len_words=header_len_words,
        type_raw=type_raw,
        timeslot=timeslot,
        arfcn=arfcn_field & GSMTAP_ARFCN_MASK,
        uplink_flag=bool(arfcn_field & GSMTAP_ARFCN_F_UPLINK),
        pcs_flag=bool(arfcn_field & GSMTAP_ARFCN_F_PCS),
        signal_dbm=signal_dbm,
        snr_db=snr_db,
        frame_number=frame_number,
        sub_type=sub_type,
        antenna=antenna,
        sub_slot=sub_slot,
        payload=raw[header_len:],
    )


def encode_gsmtap(frame):
    """Inverse of parse_gsmtap. Extra header words beyond the 16-octet header are zero-filled."""
    arfcn_field = frame.arfcn & GSMTAP_ARFCN_MASK
    if frame.uplink_flag:
        arfcn_field |= GSMTAP_ARFCN_F_UPLINK
    if frame.pcs_flag:
        arfcn_field |= GSMTAP_ARFCN_F_PCS

    header = HEADER.pack(frame.version, frame.header_len_words, frame.type_raw, frame.timeslot,
                         arfcn_field, frame.signal_dbm, frame.snr_db, frame.frame_number,
                         frame.sub_type, frame.antenna, frame.sub_slot, 0)
    header += bytes(max(0, frame.header_len_words * 4 - HEADER.size))
    return header + bytes(frame.payload)

