"""File formats.

* frames: binary PGM (``P5``, maxval 255)
* float maps: KSAL -- ``b"KSAL"``, width and height as little-endian ``uint32``,
  then ``width * height`` little-endian ``float32`` values in row-major order
* proposals: JSON Lines ``{"frame", "class", "bbox", "conf"}``
* parameter snapshots: a sequence of named records, each a ``uint32`` name
  length, the UTF-8 name, a ``uint32`` rank, ``rank`` ``uint32`` dims, and
  the tensor flattened to ``(prod(dims[:-1]), dims[-1])`` as a KSAL block

Writers emit one canonical byte layout, so decode followed by encode
reproduces a file written here bit for bit.
"""

import json
import struct
from pathlib import Path

import numpy as np

from ksora.errors import CodecError
from ksora.kos import Proposal

KSAL_MAGIC = b"KSAL"
_KSAL_HEADER = struct.Struct("<4sII")
_U32 = struct.Struct("<I")
_WHITESPACE = b" \t\r\n\x0b\x0c"


def _read_bytes(path):
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise CodecError(path, f"cannot read: {exc.strerror or exc}") from exc


# -- PGM --------------------------------------------------------------------

def _pgm_token(data, pos, path):
    n = len(data)
    while pos < n:
        if data[pos] in _WHITESPACE:
            pos += 1
        elif data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos] not in _WHITESPACE and data[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise CodecError(path, "truncated PGM header", offset=start)
    return data[start:pos], pos


def decode_pgm(data, path="<bytes>"):
    if data[:2] != b"P5":
        raise CodecError(path, f"bad PGM magic {data[:2]!r}, expected b'P5'", offset=0)
    pos = 2
    fields = []
    for name in ("width", "height", "maxval"):
        tok, pos = _pgm_token(data, pos, path)
        if not tok.isdigit():
            raise CodecError(path, f"PGM {name} is not an integer: {tok!r}", offset=pos - len(tok))
        fields.append(int(tok))
    width, height, maxval = fields
    if maxval != 255:
        raise CodecError(path, f"PGM maxval {maxval} unsupported, expected 255", offset=pos - 3)
    if width < 1 or height < 1:
        raise CodecError(path, f"PGM dims {width}x{height} must be positive", offset=2)
    if pos >= len(data) or data[pos] not in _WHITESPACE:
        raise CodecError(path, "missing whitespace after PGM maxval", offset=pos)
    pos += 1
    need = width * height
    body = data[pos:pos + need]
    if len(body) < need:
        raise CodecError(
            path, f"truncated PGM body: need {need} bytes, have {len(body)}", offset=pos + len(body)
        )
    if len(data) > pos + need:
        raise CodecError(path, f"{len(data) - pos - need} trailing bytes after PGM body", offset=pos + need)
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width).copy()


def encode_pgm(img):
    img = np.asarray(img)
    if img.ndim != 2 or img.dtype != np.uint8:
        raise ValueError(f"PGM needs a 2-D uint8 array, got {img.dtype} {img.shape}")
    h, w = img.shape
    return b"P5\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(img).tobytes()


def read_pgm(path):
    return decode_pgm(_read_bytes(path), path)


def write_pgm(path, img):
    Path(path).write_bytes(encode_pgm(img))


# -- KSAL -------------------------------------------------------------------

def _decode_ksal_block(data, offset, path):
    if len(data) - offset < _KSAL_HEADER.size:
        raise CodecError(path, "truncated KSAL header", offset=len(data))
    magic, width, height = _KSAL_HEADER.unpack_from(data, offset)
    if magic != KSAL_MAGIC:
        raise CodecError(path, f"bad KSAL magic {magic!r}", offset=offset)
    start = offset + _KSAL_HEADER.size
    need = 4 * width * height
    have = len(data) - start
    if have < need:
        raise CodecError(
            path, f"truncated KSAL body: need {need} bytes for {width}x{height}, have {have}",
            offset=len(data),
        )
    values = np.frombuffer(data, dtype="<f4", count=width * height, offset=start)
    return values.reshape(height, width).astype(np.float32), start + need


def decode_ksal(data, path="<bytes>"):
    arr, end = _decode_ksal_block(data, 0, path)
    if end != len(data):
        raise CodecError(path, f"{len(data) - end} trailing bytes after KSAL body", offset=end)
    return arr


def encode_ksal(arr):
    arr = np.asarray(arr)
    if arr.ndim != 2:
        raise ValueError(f"KSAL needs a 2-D array, got shape {arr.shape}")
    h, w = arr.shape
    return _KSAL_HEADER.pack(KSAL_MAGIC, w, h) + np.ascontiguousarray(arr, dtype="<f4").tobytes()


def read_ksal(path):
    """Decode a KSAL file; values are returned as float32."""
    return decode_ksal(_read_bytes(path), path)


def write_ksal(path, arr):
    Path(path).write_bytes(encode_ksal(arr))


# -- proposals --------------------------------------------------------------

def decode_proposals(text, path="<text>"):
    """Parse JSON Lines into ``{frame: [Proposal, ...]}`` keeping file order."""
    out = {}
    offset = 0
    for lineno, line in enumerate(text.splitlines(keepends=True), start=1):
        here = offset
        offset += len(line.encode("utf-8"))
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            frame = rec["frame"]
            bbox = rec["bbox"]
            if not isinstance(frame, int) or not isinstance(rec["class"], int):
                raise TypeError("frame and class must be integers")
            if len(bbox) != 4 or not all(isinstance(v, int) for v in bbox):
                raise TypeError("bbox must be four integers")
            prop = Proposal(rec["class"], tuple(bbox), float(rec["conf"]))
        except (ValueError, KeyError, TypeError) as exc:
            raise CodecError(path, f"line {lineno}: {exc}", offset=here) from exc
        out.setdefault(frame, []).append(prop)
    return out


def encode_proposals(by_frame):
    lines = []
    for frame in sorted(by_frame):
        for p in by_frame[frame]:
            rec = {"frame": frame, "class": p.class_id, "bbox": list(p.bbox), "conf": p.det_conf}
            lines.append(json.dumps(rec) + "\n")
    return "".join(lines)


def read_proposals(path):
    return decode_proposals(_read_bytes(path).decode("utf-8"), path)


def write_proposals(path, by_frame):
    Path(path).write_bytes(encode_proposals(by_frame).encode("utf-8"))


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


# -- parameter snapshots ----------------------------------------------------

def encode_snapshot(tensors):
    """Serialise ``{name: ndarray}`` in insertion order (values stored as float32)."""
    chunks = []
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        raw = name.encode("utf-8")
        dims = arr.shape if arr.ndim else (1,)
        chunks.append(_U32.pack(len(raw)) + raw + _U32.pack(len(dims)))
        chunks.append(b"".join(_U32.pack(d) for d in dims))
        rows = int(np.prod(dims[:-1])) if len(dims) > 1 else 1
        chunks.append(encode_ksal(arr.reshape(rows, dims[-1])))
    return b"".join(chunks)


def decode_snapshot(data, path="<bytes>"):
    out = {}
    pos = 0
    while pos < len(data):
        if len(data) - pos < 4:
            raise CodecError(path, "truncated snapshot record", offset=pos)
        (n,) = _U32.unpack_from(data, pos)
        pos += 4
        if len(data) - pos < n + 4:
            raise CodecError(path, "truncated snapshot name", offset=pos)
        name = data[pos:pos + n].decode("utf-8")
        pos += n
        (rank,) = _U32.unpack_from(data, pos)
        pos += 4
        if len(data) - pos < 4 * rank:
            raise CodecError(path, f"truncated dims for {name!r}", offset=pos)
        dims = struct.unpack_from("<%dI" % rank, data, pos)
        pos += 4 * rank
        block, pos_next = _decode_ksal_block(data, pos, path)
        if block.size != int(np.prod(dims)):
            raise CodecError(path, f"{name!r}: dims {dims} disagree with KSAL block {block.shape}", offset=pos)
        out[name] = block.reshape(dims)
        pos = pos_next
    return out


def read_snapshot(path):
    return decode_snapshot(_read_bytes(path), path)


def write_snapshot(path, tensors):
    Path(path).write_bytes(encode_snapshot(tensors))
