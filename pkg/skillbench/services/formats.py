"""Binary and text file formats.

All multi-byte values are little-endian.

``FLV1`` flow video::

    magic "FLV1" | u32 width | u32 height | u32 frame_count |
    float32 frames, frame-major, row-major, (dx, dy) interleaved

``APP1`` appearance frames: same layout with one channel per pixel.

``VQC1`` codec parameters::

    magic "VQC1" | u32 K | u32 D | u32 P (patch vector size) | u32 H (hidden) |
    u32 patch_size | float64 beta |
    float32 tensors: w_enc1 (H,P), b_enc1 (H), w_enc2 (D,H), b_enc2 (D),
    codebook (K,D), w_dec1 (H,D), b_dec1 (H), w_dec2 (P,H), b_dec2 (P)

Histogram CSV: a header row of bin indices, then one row of fractions per video.
"""

import csv
import io
import json
import struct
from pathlib import Path
from typing import TypeVar

import numpy as np
from pydantic import BaseModel, ValidationError

from skillbench.core.exceptions import FormatError
from skillbench.core.storage import atomic_write_bytes, atomic_write_text
from skillbench.services.codec import PATCH_SIZE, TENSOR_ORDER, CodecParams
from skillbench.services.corpus import DemoRecord
from skillbench.services.flow_score import FlowHistogram
from skillbench.services.simulator import FlowVideo

FLOW_MAGIC = b"FLV1"
APPEARANCE_MAGIC = b"APP1"
CODEC_MAGIC = b"VQC1"

_FRAME_HEADER = struct.Struct("<4sIII")
_CODEC_HEADER = struct.Struct("<4sIIIIId")
_LE_FLOAT32 = np.dtype("<f4")

ModelT = TypeVar("ModelT", bound=BaseModel)


def _frames_to_bytes(magic: bytes, frames: np.ndarray) -> bytes:
    count, height, width = frames.shape[:3]
    header = _FRAME_HEADER.pack(magic, width, height, count)
    return header + np.ascontiguousarray(frames, dtype=_LE_FLOAT32).tobytes()


def _frames_from_bytes(magic: bytes, data: bytes, channels: int) -> np.ndarray:
    if len(data) < _FRAME_HEADER.size:
        raise FormatError("file is shorter than its header")
    found, width, height, count = _FRAME_HEADER.unpack_from(data)
    if found != magic:
        raise FormatError(f"bad magic {found!r}, expected {magic!r}")
    expected = count * height * width * channels * _LE_FLOAT32.itemsize
    payload = data[_FRAME_HEADER.size :]
    if len(payload) != expected:
        raise FormatError(
            f"payload has {len(payload)} bytes, header implies {expected}",
            details={"width": width, "height": height, "frames": count},
        )
    values = np.frombuffer(payload, dtype=_LE_FLOAT32).astype(np.float32)
    shape = (count, height, width, channels) if channels > 1 else (count, height, width)
    return values.reshape(shape)


def flow_video_to_bytes(video: FlowVideo) -> bytes:
    return _frames_to_bytes(FLOW_MAGIC, video.frames)


def flow_video_from_bytes(data: bytes) -> FlowVideo:
    return FlowVideo(_frames_from_bytes(FLOW_MAGIC, data, channels=2))


def appearance_to_bytes(frames: np.ndarray) -> bytes:
    return _frames_to_bytes(APPEARANCE_MAGIC, frames)


def appearance_from_bytes(data: bytes) -> np.ndarray:
    return _frames_from_bytes(APPEARANCE_MAGIC, data, channels=1)


def write_flow_video(path: Path, video: FlowVideo) -> None:
    atomic_write_bytes(path, flow_video_to_bytes(video))


def read_flow_video(path: Path) -> FlowVideo:
    return flow_video_from_bytes(Path(path).read_bytes())


def codec_to_bytes(params: CodecParams) -> bytes:
    header = _CODEC_HEADER.pack(
        CODEC_MAGIC,
        params.codebook_size,
        params.latent_dim,
        params.patch_dim,
        params.hidden,
        PATCH_SIZE,
        params.beta,
    )
    body = b"".join(
        np.ascontiguousarray(tensor, dtype=_LE_FLOAT32).tobytes()
        for tensor in params.tensors().values()
    )
    return header + body


def codec_from_bytes(data: bytes) -> CodecParams:
    if len(data) < _CODEC_HEADER.size:
        raise FormatError("codec file is shorter than its header")
    magic, k, d, p, h, patch_size, beta = _CODEC_HEADER.unpack_from(data)
    if magic != CODEC_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {CODEC_MAGIC!r}")
    if patch_size != PATCH_SIZE:
        raise FormatError(f"unsupported patch size {patch_size}")
    shapes = {
        "w_enc1": (h, p),
        "b_enc1": (h,),
        "w_enc2": (d, h),
        "b_enc2": (d,),
        "codebook": (k, d),
        "w_dec1": (h, d),
        "b_dec1": (h,),
        "w_dec2": (p, h),
        "b_dec2": (p,),
    }
    offset = _CODEC_HEADER.size
    tensors: dict[str, np.ndarray] = {}
    for name in TENSOR_ORDER:
        shape = shapes[name]
        size = int(np.prod(shape))
        end = offset + size * _LE_FLOAT32.itemsize
        if end > len(data):
            raise FormatError(f"codec file truncated in tensor {name}")
        tensors[name] = (
            np.frombuffer(data[offset:end], dtype=_LE_FLOAT32).astype(np.float32).reshape(shape)
        )
        offset = end
    if offset != len(data):
        raise FormatError("codec file has trailing bytes")
    try:
        return CodecParams(beta=float(beta), **tensors)
    except ValueError as e:
        raise FormatError(f"invalid codec parameters: {e}")


def write_codec(path: Path, params: CodecParams) -> None:
    atomic_write_bytes(path, codec_to_bytes(params))


def read_codec(path: Path) -> CodecParams:
    return codec_from_bytes(Path(path).read_bytes())


def histograms_to_csv(histograms: list[FlowHistogram], bins: int = 64) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(range(bins))
    for histogram in histograms:
        if histogram.bins.shape != (bins,):
            raise ValueError(f"histogram has {histogram.bins.shape[0]} bins, expected {bins}")
        writer.writerow(repr(float(value)) for value in histogram.bins)
    return out.getvalue()


def histograms_from_csv(text: str) -> list[FlowHistogram]:
    """Read back histograms; the CSV does not carry ``total_codes``."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise FormatError("histogram CSV has no header")
    try:
        header = [int(cell) for cell in rows[0]]
        if header != list(range(len(header))):
            raise FormatError("histogram CSV header must list bins 0..n-1")
        histograms = []
        for line, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise FormatError(f"histogram CSV line {line} has {len(row)} cells")
            values = np.asarray([float(cell) for cell in row], dtype=np.float64)
            histograms.append(FlowHistogram(bins=values))
        return histograms
    except ValueError as e:
        raise FormatError(f"invalid histogram CSV: {e}")


def write_histograms(path: Path, histograms: list[FlowHistogram], bins: int = 64) -> None:
    atomic_write_text(path, histograms_to_csv(histograms, bins))


def read_histograms(path: Path) -> list[FlowHistogram]:
    return histograms_from_csv(Path(path).read_text(encoding="utf-8"))


def write_model(path: Path, model: BaseModel) -> None:
    """Pydantic model as indented JSON."""
    atomic_write_text(path, model.model_dump_json(indent=2) + "\n")


def read_model(path: Path, model_type: type[ModelT]) -> ModelT:
    try:
        return model_type.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise FormatError(f"cannot read {path}: {e}")
    except ValidationError as e:
        raise FormatError(f"{path} is not a valid {model_type.__name__}: {e.error_count()} errors")


# Corpus directory: index.json lists record ids in corpus order; each record
# directory holds flow.flv, appearance.app and meta.json.
CORPUS_INDEX = "index.json"


def write_corpus(directory: Path, records: list[DemoRecord]) -> None:
    directory = Path(directory)
    for record in records:
        folder = directory / record.record_id
        write_flow_video(folder / "flow.flv", record.video)
        atomic_write_bytes(folder / "appearance.app", appearance_to_bytes(record.appearance))
        meta = {"text": record.text, "objects": sorted(record.objects), "expert": record.expert}
        atomic_write_text(folder / "meta.json", json.dumps(meta, indent=2) + "\n")
    index = {"records": [record.record_id for record in records]}
    atomic_write_text(directory / CORPUS_INDEX, json.dumps(index, indent=2) + "\n")


def load_corpus(directory: Path) -> list[DemoRecord]:
    directory = Path(directory)
    try:
        index = json.loads((directory / CORPUS_INDEX).read_text(encoding="utf-8"))
        records = []
        for record_id in index["records"]:
            folder = directory / record_id
            meta = json.loads((folder / "meta.json").read_text(encoding="utf-8"))
            records.append(
                DemoRecord(
                    record_id=record_id,
                    video=read_flow_video(folder / "flow.flv"),
                    appearance=appearance_from_bytes((folder / "appearance.app").read_bytes()),
                    text=meta["text"],
                    objects=frozenset(meta["objects"]),
                    expert=bool(meta["expert"]),
                )
            )
    except (OSError, KeyError, TypeError, json.JSONDecodeError) as e:
        raise FormatError(f"cannot load corpus from {directory}: {e}")
    return records
