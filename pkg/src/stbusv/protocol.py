"""Protocol types, packet/cell model and conversions.

A transaction travels as a *packet*: a sequence of bus-word *cells*, one per
clock beat.  The number of cells depends on the protocol type, the opcode
size and the data width of the port it crosses.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

SUPPORTED_WIDTHS = (8, 16, 32, 64, 128, 256)
OPCODE_SIZES = (1, 2, 4, 8, 16, 32, 64)
MAX_TID = 255


class ProtocolError(Exception):
    pass


class UnsupportedWidth(ProtocolError):
    pass


class T1SizeExceedsBus(ProtocolError):
    pass


class SwapExceedsBus(ProtocolError):
    pass


class MisalignedAddress(ProtocolError):
    pass


class IncompletePacket(ProtocolError):
    pass


class MixedMeta(ProtocolError):
    pass


class InvalidRequest(ProtocolError):
    pass


class ProtocolType(enum.IntEnum):
    T1 = 1
    T2 = 2
    T3 = 3

    @property
    def max_outstanding_is_one(self) -> bool:
        return self is ProtocolType.T1


class OpKind(enum.IntEnum):
    LOAD = 1
    STORE = 2
    SWAP = 3


class Direction(enum.IntEnum):
    REQ = 0
    RSP = 1


class Endianness(enum.IntEnum):
    LITTLE = 0
    BIG = 1


class Status(enum.IntEnum):
    OK = 1
    ERR = 2


@dataclass(frozen=True, order=True)
class Opcode:
    kind: OpKind
    size_bytes: int

    def __post_init__(self):
        if self.size_bytes not in OPCODE_SIZES:
            raise InvalidRequest(f"opcode size {self.size_bytes} not in {OPCODE_SIZES}")

    def encode(self) -> int:
        """8-bit opc field: kind in bits 5:4, log2(size) in bits 2:0."""
        return (int(self.kind) << 4) | (self.size_bytes.bit_length() - 1)

    @classmethod
    def decode(cls, opc: int) -> "Opcode":
        try:
            return cls(OpKind(opc >> 4), 1 << (opc & 0x7))
        except (ValueError, InvalidRequest) as exc:
            raise InvalidRequest(f"bad opc 0x{opc:02x}") from exc

    @property
    def carries_request_data(self) -> bool:
        return self.kind is not OpKind.LOAD

    @property
    def carries_response_data(self) -> bool:
        return self.kind is not OpKind.STORE

    def __str__(self):
        return f"{self.kind.name}{self.size_bytes}"


LOAD, STORE, SWAP = OpKind.LOAD, OpKind.STORE, OpKind.SWAP


@dataclass(frozen=True)
class Request:
    src: int
    tid: int
    opcode: Opcode
    addr: int
    data: bytes = b""
    chunk_id: int | None = None
    issue_cycle: int = 0
    # set on every packet of a chunk except the final one
    lck: bool = False

    def __post_init__(self):
        size = self.opcode.size_bytes
        if not 0 <= self.tid <= MAX_TID:
            raise InvalidRequest(f"tid {self.tid} out of range")
        if not 0 <= self.addr < (1 << 32):
            raise InvalidRequest(f"addr 0x{self.addr:x} outside 32-bit space")
        if self.addr % size:
            raise MisalignedAddress(f"addr 0x{self.addr:x} not aligned to {size}")
        expected = size if self.opcode.carries_request_data else 0
        if len(self.data) != expected:
            raise InvalidRequest(
                f"{self.opcode} carries {len(self.data)} data bytes, expected {expected}")
        if self.issue_cycle < 0:
            raise InvalidRequest("negative issue_cycle")


@dataclass(frozen=True)
class Response:
    src: int
    tid: int
    status: Status
    data: bytes = b""
    opcode: Opcode | None = None
    addr: int = 0

    def __post_init__(self):
        if self.status is Status.ERR and self.data:
            raise InvalidRequest("ERR responses carry no data")


@dataclass(frozen=True)
class CellMeta:
    src: int
    tid: int
    opcode: Opcode
    addr: int
    direction: Direction = Direction.REQ
    status: Status = Status.OK

    @property
    def has_data(self) -> bool:
        if self.direction is Direction.REQ:
            return self.opcode.carries_request_data
        return self.status is Status.OK and self.opcode.carries_response_data


@dataclass(frozen=True)
class Cell:
    payload: int
    byte_enables: int
    eop: bool
    lck: bool
    meta: CellMeta


@dataclass
class Chunk:
    chunk_id: int
    requests: list = field(default_factory=list)


def make_chunk(chunk_id: int, requests: Sequence[Request]) -> Chunk:
    """Tag a run of same-initiator requests as one chunk (lck on all but the last)."""
    if not requests:
        raise InvalidRequest("empty chunk")
    srcs = {r.src for r in requests}
    if len(srcs) != 1:
        raise InvalidRequest("chunk requests must share src")
    last = len(requests) - 1
    tagged = [
        Request(r.src, r.tid, r.opcode, r.addr, r.data, chunk_id, r.issue_cycle, k != last)
        for k, r in enumerate(requests)
    ]
    return Chunk(chunk_id, tagged)


def check_width(width_bits: int) -> int:
    if width_bits not in SUPPORTED_WIDTHS:
        raise UnsupportedWidth(f"width {width_bits} not in {SUPPORTED_WIDTHS}")
    return width_bits


def cells_per_packet(opcode: Opcode, width_bits: int, ptype: ProtocolType,
                     direction: Direction) -> int:
    check_width(width_bits)
    size = opcode.size_bytes
    if opcode.kind is OpKind.SWAP and size * 8 > width_bits:
        # the atomic operation is always a single cell
        raise SwapExceedsBus(f"{opcode} does not fit a {width_bits}-bit bus")
    if ptype is ProtocolType.T1:
        if size * 8 > width_bits:
            raise T1SizeExceedsBus(f"{opcode} does not fit a {width_bits}-bit T1 bus")
        return 1
    full = max(1, size * 8 // width_bits)
    if ptype is ProtocolType.T2:
        return full
    # T3: requests carry only what they must
    if opcode.kind is OpKind.SWAP:
        return 1
    if opcode.kind is OpKind.LOAD:
        return 1 if direction is Direction.REQ else full
    return full if direction is Direction.REQ else 1


def lane_of(byte_index: int, width_bytes: int, endianness: Endianness) -> int:
    lane = byte_index % width_bytes
    return lane if endianness is Endianness.LITTLE else width_bytes - 1 - lane


def cell_lanes(addr: int, size: int, width_bits: int, index: int,
               endianness: Endianness) -> list[int]:
    """Byte lanes, in address order, that cell ``index`` of a packet occupies."""
    wb = width_bits // 8
    if size <= wb:
        if index:
            return []
        off = addr % wb
        return [lane_of(off + k, wb, endianness) for k in range(size)]
    if index >= size // wb:
        return []
    return [lane_of(k, wb, endianness) for k in range(wb)]


def pack_cell(data: bytes | bytearray | None, addr: int, size: int, width_bits: int,
              index: int, endianness: Endianness) -> tuple[int, int]:
    """Return (payload, byte_enables) for cell ``index``.

    ``data`` is the full packet image or None for a dataless packet; in the
    latter case the payload is zero but the addressed lanes stay enabled.
    """
    wb = width_bits // 8
    lanes = cell_lanes(addr, size, width_bits, index, endianness)
    be = 0
    payload = 0
    base = index * wb if size > wb else 0
    for k, lane in enumerate(lanes):
        be |= 1 << lane
        if data is not None:
            payload |= data[base + k] << (8 * lane)
    return payload, be


def unpack_cell(payload: int, addr: int, size: int, width_bits: int, index: int,
                endianness: Endianness, image: bytearray) -> None:
    """Inverse of pack_cell: scatter the cell's addressed lanes into ``image``."""
    wb = width_bits // 8
    base = index * wb if size > wb else 0
    for k, lane in enumerate(cell_lanes(addr, size, width_bits, index, endianness)):
        image[base + k] = payload >> (8 * lane) & 0xFF


def build_cells(meta: CellMeta, data: bytes, width_bits: int, ptype: ProtocolType,
                endianness: Endianness, lck: bool = False) -> list[Cell]:
    if meta.status is Status.ERR:
        count = 1
    else:
        count = cells_per_packet(meta.opcode, width_bits, ptype, meta.direction)
    size = meta.opcode.size_bytes
    image = data if meta.has_data else None
    if image is not None and len(image) != size:
        raise InvalidRequest(f"packet image has {len(image)} bytes, expected {size}")
    cells = []
    for j in range(count):
        payload, be = pack_cell(image, meta.addr, size, width_bits, j, endianness)
        if image is None and meta.direction is Direction.RSP:
            be = 0
        cells.append(Cell(payload, be, j == count - 1, lck, meta))
    return cells


def build_request_cells(req: Request, width_bits: int, ptype: ProtocolType,
                        endianness: Endianness) -> list[Cell]:
    if req.addr % req.opcode.size_bytes:
        raise MisalignedAddress(f"addr 0x{req.addr:x}")
    meta = CellMeta(req.src, req.tid, req.opcode, req.addr, Direction.REQ)
    return build_cells(meta, req.data, width_bits, ptype, endianness, req.lck)


def build_response_cells(rsp: Response, opcode: Opcode, addr: int, width_bits: int,
                         ptype: ProtocolType, endianness: Endianness) -> list[Cell]:
    meta = CellMeta(rsp.src, rsp.tid, opcode, addr, Direction.RSP, rsp.status)
    return build_cells(meta, rsp.data, width_bits, ptype, endianness)


def _check_packet(cells: Sequence[Cell]) -> None:
    if not cells or not cells[-1].eop:
        raise IncompletePacket("packet has no terminating eop")
    if any(c.eop for c in cells[:-1]):
        raise IncompletePacket("eop before the last cell")
    meta = cells[0].meta
    if any(c.meta != meta for c in cells[1:]):
        raise MixedMeta("cells of one packet carry different meta")


def _lanes_from_be(be: int, width_bytes: int, endianness: Endianness) -> list[int]:
    lanes = [k for k in range(width_bytes) if be >> k & 1]
    return lanes if endianness is Endianness.LITTLE else lanes[::-1]


def rebuild_payload(cells: Sequence[Cell], endianness: Endianness,
                    width_bits: int | None = None) -> bytes:
    """Concatenate enabled payload bytes of one packet, in address order."""
    _check_packet(cells)
    if not cells[0].meta.has_data:
        return b""
    if width_bits is None:
        top = max((c.byte_enables.bit_length() for c in cells), default=0)
        width_bits = 8
        while width_bits < top * 8:
            width_bits *= 2
    wb = width_bits // 8
    out = bytearray()
    for c in cells:
        for lane in _lanes_from_be(c.byte_enables, wb, endianness):
            out.append(c.payload >> (8 * lane) & 0xFF)
    return bytes(out)


def split_packets(cells: Iterable[Cell]) -> list[list[Cell]]:
    packets, cur = [], []
    for c in cells:
        cur.append(c)
        if c.eop:
            packets.append(cur)
            cur = []
    if cur:
        raise IncompletePacket("trailing cells without eop")
    return packets


def size_convert(cells: Sequence[Cell], width_from: int, width_to: int,
                 endianness: Endianness, ptype: ProtocolType = ProtocolType.T2) -> list[Cell]:
    """Re-cut whole packets for a bus of a different width.

    Payload bytes and packet boundaries are preserved; eop is recomputed and
    lck carried per packet.  ``ptype`` fixes the cell count of dataless
    packets (T3 keeps them single-cell).
    """
    check_width(width_from)
    check_width(width_to)
    out = []
    for packet in split_packets(cells):
        _check_packet(packet)
        meta = packet[0].meta
        data = rebuild_payload(packet, endianness, width_from)
        out.extend(build_cells(meta, data, width_to, ptype, endianness, packet[0].lck))
    return out


# -- type conversion over transaction streams --------------------------------

@dataclass(frozen=True, order=True)
class TxnEvent:
    cycle: int
    direction: Direction
    src: int
    tid: int


@dataclass
class TxnStream:
    ptype: ProtocolType
    events: list
    # set by upward conversions: the stream only uses this type's capabilities
    restricted_to: ProtocolType | None = None


def _ordered(events: Iterable[TxnEvent]) -> list[TxnEvent]:
    return sorted(events, key=lambda e: (e.cycle, e.direction, e.src, e.tid))


def _pair_requests(events: Sequence[TxnEvent]):
    """Yield (request, response|None) per initiator in request order."""
    pending: dict[tuple[int, int], deque] = {}
    order: dict[int, list] = {}
    for ev in _ordered(events):
        key = (ev.src, ev.tid)
        if ev.direction is Direction.REQ:
            slot = [ev, None]
            pending.setdefault(key, deque()).append(slot)
            order.setdefault(ev.src, []).append(slot)
        else:
            q = pending.get(key)
            if not q:
                raise ProtocolError(f"response without request: src={ev.src} tid={ev.tid}")
            q.popleft()[1] = ev
    return order


def _to_t2(events: Sequence[TxnEvent]) -> list[TxnEvent]:
    out = []
    for src, slots in _pair_requests(events).items():
        release = -1
        for req, rsp in slots:
            out.append(req)
            if rsp is None:
                continue
            # one response per cycle leaves the ordering buffer
            release = max(rsp.cycle, release + 1)
            out.append(TxnEvent(release, Direction.RSP, rsp.src, rsp.tid))
    return _ordered(out)


def _to_t1(events: Sequence[TxnEvent]) -> list[TxnEvent]:
    out = []
    for src, slots in _pair_requests(events).items():
        free = 0
        for req, rsp in slots:
            start = max(req.cycle, free)
            out.append(TxnEvent(start, Direction.REQ, req.src, req.tid))
            if rsp is None:
                free = float("inf")
                continue
            end = start + (rsp.cycle - req.cycle)
            out.append(TxnEvent(end, Direction.RSP, rsp.src, rsp.tid))
            free = end + 1
    return _ordered(out)


def convert_type(events: Iterable[TxnEvent], src_type: ProtocolType,
                 dst_type: ProtocolType) -> TxnStream:
    """Adapt a transaction stream to a different protocol type.

    Downward conversions add an ordering buffer (to T2) and serialization
    (to T1); upward conversions pass through with a capability flag.
    """
    if src_type == dst_type:
        raise ValueError("convert_type needs two different protocol types")
    events = _ordered(events)
    if dst_type > src_type:
        return TxnStream(dst_type, events, restricted_to=src_type)
    if src_type is ProtocolType.T3:
        events = _to_t2(events)
    if dst_type is ProtocolType.T1:
        events = _to_t1(events)
    return TxnStream(dst_type, events)
