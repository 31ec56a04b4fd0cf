import functools
import struct

import numpy as np

from maskrepair.synth import generate_phantom


@functools.lru_cache(maxsize=None)
def phantom(seed, dims=64):
    return generate_phantom(seed, (dims,) * 3)


def box(shape, lo, hi):
    arr = np.zeros(shape, dtype=bool)
    arr[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] = True
    return arr


def hand_header(dims, datatype, bitpix, endian="<", spacing=(1.0, 1.0, 1.0), slope=1.0, inter=0.0):
    """NIfTI-1 header assembled field by field at the documented byte offsets."""
    hdr = bytearray(348)
    struct.pack_into(endian + "i", hdr, 0, 348)
    struct.pack_into(endian + "8h", hdr, 40, 3, *dims, 1, 1, 1, 1)
    struct.pack_into(endian + "h", hdr, 70, datatype)
    struct.pack_into(endian + "h", hdr, 72, bitpix)
    struct.pack_into(endian + "8f", hdr, 76, 1.0, *spacing, 1, 1, 1, 1)
    struct.pack_into(endian + "f", hdr, 108, 352.0)
    struct.pack_into(endian + "f", hdr, 112, slope)
    struct.pack_into(endian + "f", hdr, 116, inter)
    hdr[344:348] = b"n+1\x00"
    return bytes(hdr) + b"\x00" * 4
