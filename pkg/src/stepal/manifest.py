"""Binary dataset manifest: a portable dump of a video pool.

Layout (all integers and floats little-endian)::

    header   magic "SALM" | u8 version | 3 pad bytes | u32 C | u32 D | u32 n_videos
    video    u16 id_len | id (utf-8) | u32 T | u8 flags
    clip     D x f64 features | i32 true step (-1 = absent) | [C x f64 logits]

``flags`` bit 0: logits present, bit 1: video labelled, bit 2: true steps
present.  Clip records follow their video record back to back, and videos
appear in ascending id order.  Pseudo-labels are not stored; they are
recomputed from logits on load.
"""

import struct

import numpy as np

from .exceptions import FormatError, ShapeMismatch, VersionError
from .pool import DatasetPool, PoolState, VideoRecord

MAGIC = b"SALM"
VERSION = 1
HEADER = struct.Struct("<4sB3xIII")
VIDEO_ID_LEN = struct.Struct("<H")
VIDEO_TAIL = struct.Struct("<IB")

FLAG_LOGITS = 1
FLAG_LABELED = 2
FLAG_TRUTH = 4


def _clip_dtype(C, D, with_logits):
    fields = [("features", "<f8", (D,)), ("step", "<i4")]
    if with_logits:
        fields.append(("logits", "<f8", (C,)))
    return np.dtype(fields)


def encode(pool: DatasetPool) -> bytes:
    C, D = pool.step_count, pool.feature_dim
    parts = [HEADER.pack(MAGIC, VERSION, C, D, len(pool))]
    for video in pool.iter_videos():
        raw_id = video.video_id.encode("utf-8")
        flags = (
            (FLAG_LOGITS if video.logits is not None else 0)
            | (FLAG_LABELED if video.is_labeled else 0)
            | (FLAG_TRUTH if video.true_steps is not None else 0)
        )
        parts.append(VIDEO_ID_LEN.pack(len(raw_id)) + raw_id + VIDEO_TAIL.pack(video.n_clips, flags))
        rec = np.zeros(video.n_clips, dtype=_clip_dtype(C, D, video.logits is not None))
        rec["features"] = video.features
        rec["step"] = -1 if video.true_steps is None else video.true_steps
        if video.logits is not None:
            rec["logits"] = video.logits
        parts.append(rec.tobytes())
    return b"".join(parts)


def _need(data, offset, size, what):
    if offset + size > len(data):
        raise ShapeMismatch(
            f"truncated {what}: need {size} bytes, {len(data) - offset} left",
            offset=offset,
        )


def decode(data: bytes) -> DatasetPool:
    _need(data, 0, HEADER.size, "header")
    magic, version, C, D, n_videos = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=0)
    if version != VERSION:
        raise VersionError(f"unsupported manifest version {version} (reader supports {VERSION})", offset=4)
    if C < 2 or D < 1:
        raise ShapeMismatch(f"invalid dimensions C={C}, D={D}", offset=8)
    offset = HEADER.size
    videos = []
    for index in range(n_videos):
        _need(data, offset, VIDEO_ID_LEN.size, f"id length of video {index}")
        (id_len,) = VIDEO_ID_LEN.unpack_from(data, offset)
        offset += VIDEO_ID_LEN.size
        _need(data, offset, id_len, f"id of video {index}")
        try:
            vid = data[offset : offset + id_len].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"video {index} id is not utf-8", offset=offset) from exc
        offset += id_len
        _need(data, offset, VIDEO_TAIL.size, f"header of video {vid!r}")
        T, flags = VIDEO_TAIL.unpack_from(data, offset)
        offset += VIDEO_TAIL.size
        if T < 1:
            raise ShapeMismatch(f"video {vid!r} declares T={T}", offset=offset - VIDEO_TAIL.size)
        dtype = _clip_dtype(C, D, bool(flags & FLAG_LOGITS))
        _need(data, offset, T * dtype.itemsize, f"clips of video {vid!r}")
        rec = np.frombuffer(data, dtype=dtype, count=T, offset=offset)
        steps = rec["step"].astype(np.int64)
        if flags & FLAG_TRUTH:
            bad = np.flatnonzero((steps < 0) | (steps >= C))
            if bad.size:
                raise FormatError(
                    f"video {vid!r} clip {bad[0]} has step {steps[bad[0]]} outside [0, {C})",
                    offset=offset + int(bad[0]) * dtype.itemsize + 8 * D,
                )
        video = VideoRecord(
            video_id=vid,
            features=rec["features"].astype(np.float64),
            true_steps=steps if flags & FLAG_TRUTH else None,
            state=PoolState.LABELED if flags & FLAG_LABELED else PoolState.UNLABELED,
        )
        if flags & FLAG_LOGITS:
            video = video.with_inference(rec["logits"].astype(np.float64))
        videos.append(video)
        offset += T * dtype.itemsize
    if offset != len(data):
        raise ShapeMismatch(f"{len(data) - offset} trailing bytes after last video", offset=offset)
    return DatasetPool.from_videos(videos, C, D)


def write_manifest(pool: DatasetPool, path):
    with open(path, "wb") as fh:
        fh.write(encode(pool))


def read_manifest(path) -> DatasetPool:
    with open(path, "rb") as fh:
        return decode(fh.read())


def read_header(path):
    with open(path, "rb") as fh:
        data = fh.read(HEADER.size)
    _need(data, 0, HEADER.size, "header")
    magic, version, C, D, n = HEADER.unpack(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", offset=0)
    return {"version": version, "step_count": C, "feature_dim": D, "n_videos": n}
