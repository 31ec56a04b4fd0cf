"""NIfTI-1 reader and writer for integer label volumes (.nii and .nii.gz).

Only the single-file ``n+1`` layout with 3-D (or singleton 4-D) integer data
is handled. Headers are parsed with a structured numpy dtype so either byte
order can be read; files are always written little-endian.
"""

from __future__ import annotations

import gzip
import io
import logging
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import (
    CorruptHeader,
    IoError,
    LabelOverflow,
    NonIntegerData,
    ScaledLabelData,
    UnsupportedDatatype,
)
from .volume import AXIS_CODES, LabelVolume

log = logging.getLogger(__name__)

HEADER_FIELDS = [
    ("sizeof_hdr", "i4"),
    ("data_type", "S10"),
    ("db_name", "S18"),
    ("extents", "i4"),
    ("session_error", "i2"),
    ("regular", "S1"),
    ("dim_info", "u1"),
    ("dim", "i2", (8,)),
    ("intent_p1", "f4"),
    ("intent_p2", "f4"),
    ("intent_p3", "f4"),
    ("intent_code", "i2"),
    ("datatype", "i2"),
    ("bitpix", "i2"),
    ("slice_start", "i2"),
    ("pixdim", "f4", (8,)),
    ("vox_offset", "f4"),
    ("scl_slope", "f4"),
    ("scl_inter", "f4"),
    ("slice_end", "i2"),
    ("slice_code", "u1"),
    ("xyzt_units", "u1"),
    ("cal_max", "f4"),
    ("cal_min", "f4"),
    ("slice_duration", "f4"),
    ("toffset", "f4"),
    ("glmax", "i4"),
    ("glmin", "i4"),
    ("descrip", "S80"),
    ("aux_file", "S24"),
    ("qform_code", "i2"),
    ("sform_code", "i2"),
    ("quatern_b", "f4"),
    ("quatern_c", "f4"),
    ("quatern_d", "f4"),
    ("qoffset_x", "f4"),
    ("qoffset_y", "f4"),
    ("qoffset_z", "f4"),
    ("srow_x", "f4", (4,)),
    ("srow_y", "f4", (4,)),
    ("srow_z", "f4", (4,)),
    ("intent_name", "S16"),
    ("magic", "S4"),
]
HEADER_SIZE = 348
VOX_OFFSET = 352


def header_dtype(byteorder="<") -> np.dtype:
    fields = []
    for f in HEADER_FIELDS:
        name, code = f[0], f[1]
        if code[0] in "iuf" and code != "u1":
            code = byteorder + code
        fields.append((name, code) + tuple(f[2:]))
    dt = np.dtype(fields)
    assert dt.itemsize == HEADER_SIZE
    return dt


# NIfTI datatype code -> numpy type
LABEL_TYPES = {2: np.uint8, 4: np.int16, 8: np.int32, 512: np.uint16}
FLOAT_TYPES = {16: np.float32, 64: np.float64}
KNOWN_OTHER = {1, 32, 128, 256, 768, 1024, 1280, 1536, 1792, 2048, 2304}
_CODE_OF = {np.dtype(v): k for k, v in LABEL_TYPES.items()}


def _read_bytes(path) -> bytes:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if raw[:2] == b"\x1f\x8b":
        try:
            raw = gzip.decompress(raw)
        except (OSError, EOFError) as exc:
            raise CorruptHeader(f"{path}: damaged gzip stream: {exc}") from exc
    elif str(path).endswith(".gz"):
        log.warning("%s has a .gz suffix but is not gzip-compressed", path)
    return raw


def parse_header(raw: bytes):
    """Decode the first 348 bytes; returns ``(header, byteorder)``.

    Byte order is detected from ``sizeof_hdr``.
    """
    if len(raw) < HEADER_SIZE:
        raise CorruptHeader(f"file holds {len(raw)} bytes, header needs {HEADER_SIZE}")
    for order in "<>":
        hdr = np.frombuffer(raw[:HEADER_SIZE], dtype=header_dtype(order))[0]
        if int(hdr["sizeof_hdr"]) == HEADER_SIZE:
            break
    else:
        raise CorruptHeader("sizeof_hdr is not 348 in either byte order")
    if hdr["magic"] not in (b"n+1", b"ni1"):
        raise CorruptHeader(f"bad magic {bytes(hdr['magic'])!r}")
    if hdr["magic"] == b"ni1":
        raise CorruptHeader("two-file (.hdr/.img) NIfTI pairs are not supported")
    return hdr, order


def quaternion_matrix(b, c, d, qfac):
    """Rotation part of the qform (columns scaled by qfac on the third axis)."""
    a2 = 1.0 - (b * b + c * c + d * d)
    a = np.sqrt(a2) if a2 > 1e-7 else 0.0
    r = np.array([
        [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
        [2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)],
        [2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b],
    ])
    r[:, 2] *= qfac
    return r


def orientation_from_matrix(m: np.ndarray):
    """Anatomical axis code per voxel axis from a 3x3 voxel-to-world matrix.

    World rows are x (left-right), y (anterior-posterior), z (superior-inferior).
    """
    codes = []
    for col in range(3):
        mags = np.abs(m[:, col])
        w = int(np.argmax(mags))
        if mags[w] == 0:
            return (None, None, None)
        rest = np.delete(mags, w)
        if rest.max() > 0.2 * mags[w]:
            log.warning("oblique orientation: voxel axis %d is off-axis by more than 20%%", col)
        codes.append(AXIS_CODES[w])
    if len(set(codes)) != 3:
        log.warning("orientation matrix maps two voxel axes to one world axis; ignoring it")
        return (None, None, None)
    return tuple(codes)


def header_orientation(hdr):
    if int(hdr["sform_code"]) > 0:
        m = np.stack([hdr["srow_x"][:3], hdr["srow_y"][:3], hdr["srow_z"][:3]]).astype(float)
        return orientation_from_matrix(m)
    if int(hdr["qform_code"]) > 0:
        qfac = -1.0 if hdr["pixdim"][0] < 0 else 1.0
        r = quaternion_matrix(float(hdr["quatern_b"]), float(hdr["quatern_c"]),
                              float(hdr["quatern_d"]), qfac)
        return orientation_from_matrix(r)
    return (None, None, None)


def read_label_volume(path) -> LabelVolume:
    """Load an integer label volume; float or intensity-scaled files are refused."""
    raw = _read_bytes(path)
    hdr, byteorder = parse_header(raw)

    dim = [int(v) for v in hdr["dim"]]
    if dim[0] not in (3, 4) or any(d < 1 for d in dim[1:4]):
        raise CorruptHeader(f"unsupported dim {dim}")
    if dim[0] == 4 and dim[4] != 1:
        raise CorruptHeader(f"4-D data with {dim[4]} volumes is not a label volume")

    code = int(hdr["datatype"])
    if code in FLOAT_TYPES:
        raise NonIntegerData(f"datatype {code} is floating point; label data must be integer")
    if code not in LABEL_TYPES:
        raise UnsupportedDatatype(f"datatype {code} is not supported for label volumes")
    dtype = np.dtype(LABEL_TYPES[code]).newbyteorder(byteorder)
    if int(hdr["bitpix"]) != dtype.itemsize * 8:
        raise CorruptHeader(f"bitpix {int(hdr['bitpix'])} disagrees with datatype {code}")

    slope, inter = float(hdr["scl_slope"]), float(hdr["scl_inter"])
    if not (slope in (0.0, 1.0) and (inter == 0.0 or slope == 0.0)) or not np.isfinite(slope):
        raise ScaledLabelData(f"scl_slope={slope}, scl_inter={inter}; label data must be unscaled")

    offset = int(hdr["vox_offset"])
    if offset < HEADER_SIZE:
        raise CorruptHeader(f"vox_offset {offset} lies inside the header")
    shape = tuple(dim[1:4])
    n = int(np.prod(shape))
    need = offset + n * dtype.itemsize
    if len(raw) < need:
        raise CorruptHeader(f"file truncated: {len(raw)} bytes, expected {need}")
    flat = np.frombuffer(raw, dtype=dtype, count=n, offset=offset)
    if flat.size and flat.min() < 0:
        raise CorruptHeader("negative values in label data")
    data = flat.reshape(shape, order="F").astype(np.int32)

    spacing = tuple(float(abs(v)) for v in hdr["pixdim"][1:4])
    if not all(s > 0 for s in spacing):
        raise CorruptHeader(f"non-positive pixdim {spacing}")
    return LabelVolume(data, spacing, header_orientation(hdr))


def choose_datatype(max_label: int):
    if max_label <= np.iinfo(np.uint8).max:
        return np.uint8
    if max_label <= np.iinfo(np.uint16).max:
        return np.uint16
    if max_label <= np.iinfo(np.int32).max:
        return np.int32
    raise LabelOverflow(f"label {max_label} does not fit any supported datatype")


def build_header(volume: LabelVolume, dtype, byteorder="<") -> np.ndarray:
    hdr = np.zeros((), dtype=header_dtype(byteorder))
    hdr["sizeof_hdr"] = HEADER_SIZE
    hdr["regular"] = b"r"
    hdr["dim"] = [3, *volume.dims, 1, 1, 1, 1]
    hdr["datatype"] = _CODE_OF[np.dtype(dtype)]
    hdr["bitpix"] = np.dtype(dtype).itemsize * 8
    hdr["pixdim"] = [1.0, *volume.spacing, 1.0, 1.0, 1.0, 1.0]
    hdr["vox_offset"] = VOX_OFFSET
    hdr["scl_slope"] = 1.0
    hdr["xyzt_units"] = 2  # millimetres
    hdr["magic"] = b"n+1"
    if all(c is not None for c in volume.orientation):
        rows = np.zeros((3, 4))
        for axis, code in enumerate(volume.orientation):
            rows[AXIS_CODES.index(code), axis] = volume.spacing[axis]
        hdr["sform_code"] = 1
        hdr["srow_x"], hdr["srow_y"], hdr["srow_z"] = rows
    return hdr


def encode(volume: LabelVolume, datatype=None, byteorder="<") -> bytes:
    """Serialise a label volume to uncompressed NIfTI-1 bytes."""
    max_label = int(volume.data.max()) if volume.data.size else 0
    dtype = np.dtype(datatype or choose_datatype(max_label))
    if dtype not in _CODE_OF:
        raise UnsupportedDatatype(f"cannot write datatype {dtype}")
    info = np.iinfo(dtype)
    if max_label > info.max:
        raise LabelOverflow(f"label {max_label} exceeds {dtype} range")
    hdr = build_header(volume, dtype, byteorder)
    body = volume.data.ravel(order="F").astype(dtype.newbyteorder(byteorder))
    return hdr.tobytes() + b"\x00" * (VOX_OFFSET - HEADER_SIZE) + body.tobytes()


def atomic_write(path, payload: bytes) -> None:
    """Write via a temporary sibling file and rename, so readers never see partial files."""
    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise IoError(f"cannot write {path}: {exc}") from exc


def write_label_volume(volume: LabelVolume, path, compress=None, datatype=None, byteorder="<") -> None:
    """Write ``volume``; ``compress=None`` compresses when the path ends in ``.gz``."""
    if compress is None:
        compress = str(path).endswith(".gz")
    payload = encode(volume, datatype, byteorder)
    if compress:
        buf = io.BytesIO()
        # fixed mtime and no embedded name keep the output byte-reproducible
        with gzip.GzipFile(filename="", mode="wb", fileobj=buf, mtime=0) as gz:
            gz.write(payload)
        payload = buf.getvalue()
    atomic_write(path, payload)


def is_nifti(path) -> bool:
    name = str(path)
    return name.endswith(".nii") or name.endswith(".nii.gz")


def case_name(path) -> str:
    name = Path(path).name
    for suffix in (".nii.gz", ".nii"):
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return Path(path).stem
