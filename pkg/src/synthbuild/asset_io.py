"""Byte-deterministic readers and writers for every artifact the pipeline emits.

All writers go through :func:`atomic_write`, so an interrupted run never
leaves a truncated file under its final name.
"""

from __future__ import annotations

import json
import logging
import os
import struct
import tempfile
import zlib
from contextlib import contextmanager
from pathlib import Path
from typing import TYPE_CHECKING, Any, Iterable

import numpy as np

from .geometry import ComponentClass, Mesh, PointCloud

if TYPE_CHECKING:
    from .scene import MaterialSpec

log = logging.getLogger(__name__)

DEPTH_BACKGROUND = 1e30  # written in place of +inf in float depth files


class ObjParseError(ValueError):
    pass


@contextmanager
def atomic_write(path: str | Path, mode: str = "wb"):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, mode, **({} if "b" in mode else {"encoding": "utf-8", "newline": "\n"})) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


# -- OBJ / MTL ---------------------------------------------------------------

def _fmt(x: float) -> str:
    s = f"{x:.9g}"
    return "0" if s == "-0" else s


def material_name(material_id: int) -> str:
    return f"mat_{material_id}"


def obj_text(mesh: Mesh, mtl_name: str | None = None) -> str:
    lines = []
    if mtl_name:
        lines.append(f"mtllib {mtl_name}")
    for x, y, z in mesh.vertices:
        lines.append(f"v {_fmt(x)} {_fmt(y)} {_fmt(z)}")
    order = np.lexsort((np.arange(mesh.n_triangles), mesh.component, mesh.volume_id))
    group = material = None
    for t in order:
        g = (int(mesh.component[t]), int(mesh.volume_id[t]))
        if g != group:
            lines.append(f"g {ComponentClass(g[0]).key}_{g[1]}")
            group, material = g, None
        m = int(mesh.material_id[t])
        if m != material:
            lines.append(f"usemtl {material_name(m)}")
            material = m
        a, b, c = mesh.triangles[t] + 1
        lines.append(f"f {a} {b} {c}")
    return "\n".join(lines) + "\n"


def write_obj(mesh: Mesh, path: str | Path, mtl_name: str | None = None) -> None:
    """Write ``v``/``f`` records grouped by ``g <component>_<volume>`` with ``usemtl``."""
    with atomic_write(path, "w") as fh:
        fh.write(obj_text(mesh, mtl_name))


def mtl_text(materials: Iterable[MaterialSpec]) -> str:
    lines = []
    for m in sorted(materials, key=lambda m: m.material_id):
        r, g, b = m.albedo
        lines += [f"newmtl {material_name(m.material_id)}", f"Kd {_fmt(r)} {_fmt(g)} {_fmt(b)}",
                  f"Ks {_fmt(m.reflectance)} {_fmt(m.reflectance)} {_fmt(m.reflectance)}"]
        if m.texture is not None:
            lines.append(f"map_Kd {m.texture}")
        lines.append("")
    return "\n".join(lines)


def write_mtl(materials: Iterable[MaterialSpec], path: str | Path) -> None:
    with atomic_write(path, "w") as fh:
        fh.write(mtl_text(materials))


def read_obj(path: str | Path) -> Mesh:
    """Parse the OBJ subset ``v``/``vn``/``f`` (polygons are fanned).

    ``g <component>_<volume>`` and ``usemtl mat_<id>`` lines written by
    :func:`write_obj` restore the per-triangle tags; other groups and
    materials simply leave the defaults.
    """
    verts: list[tuple[float, float, float]] = []
    tris: list[tuple[int, int, int]] = []
    comps: list[int] = []
    mats: list[int] = []
    vols: list[int] = []
    comp, mat, vol = int(ComponentClass.WALL), 0, 0
    ignored: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tag, *rest = line.split()
            if tag == "v":
                if len(rest) < 3:
                    raise ObjParseError(f"{path}:{lineno}: vertex needs 3 coordinates")
                try:
                    verts.append((float(rest[0]), float(rest[1]), float(rest[2])))
                except ValueError:
                    raise ObjParseError(f"{path}:{lineno}: bad vertex {line!r}") from None
            elif tag == "f":
                if len(rest) < 3:
                    raise ObjParseError(f"{path}:{lineno}: face needs at least 3 vertices")
                idx = []
                for ref in rest:
                    try:
                        i = int(ref.split("/")[0])
                    except ValueError:
                        raise ObjParseError(f"{path}:{lineno}: bad face index {ref!r}") from None
                    i = i - 1 if i > 0 else len(verts) + i
                    if not 0 <= i < len(verts):
                        raise ObjParseError(f"{path}:{lineno}: face index {ref} out of range")
                    idx.append(i)
                for k in range(1, len(idx) - 1):
                    tris.append((idx[0], idx[k], idx[k + 1]))
                    comps.append(comp)
                    mats.append(mat)
                    vols.append(vol)
            elif tag == "g":
                comp, vol = _parse_group(rest, comp, vol)
            elif tag == "usemtl":
                if rest and rest[0].startswith("mat_") and rest[0][4:].isdigit():
                    mat = int(rest[0][4:])
            elif tag in ("vn", "vt", "o", "s", "mtllib"):
                pass
            else:
                ignored.add(tag)
    if ignored:
        log.warning("%s: ignored OBJ directives %s", path, sorted(ignored))
    return Mesh(np.array(verts, dtype=np.float64).reshape(-1, 3), np.array(tris, dtype=np.int64).reshape(-1, 3),
                np.array(comps), np.array(mats), np.array(vols))


def _parse_group(rest: list[str], comp: int, vol: int) -> tuple[int, int]:
    if len(rest) == 1 and "_" in rest[0]:
        name, _, num = rest[0].rpartition("_")
        if num.isdigit():
            try:
                return int(ComponentClass[name.upper()]), int(num)
            except KeyError:
                pass
    return comp, vol


# -- PLY ---------------------------------------------------------------------

def ply_header(n: int, binary: bool) -> bytes:
    fmt = "binary_little_endian" if binary else "ascii"
    return (f"ply\nformat {fmt} 1.0\nelement vertex {n}\n"
            "property float x\nproperty float y\nproperty float z\nend_header\n").encode("ascii")


def write_ply(cloud: PointCloud, path: str | Path, binary: bool = False) -> None:
    pts = cloud.points.astype("<f4")
    with atomic_write(path, "wb") as fh:
        fh.write(ply_header(cloud.count, binary))
        if binary:
            fh.write(pts.tobytes())
        else:
            fh.write("".join(f"{_fmt(x)} {_fmt(y)} {_fmt(z)}\n" for x, y, z in pts.tolist()).encode("ascii"))


def read_ply(path: str | Path) -> np.ndarray:
    """Read back a cloud written by :func:`write_ply` as float32 (N, 3)."""
    data = Path(path).read_bytes()
    end = data.index(b"end_header\n") + len(b"end_header\n")
    header = data[:end].decode("ascii").splitlines()
    n = next(int(l.split()[2]) for l in header if l.startswith("element vertex"))
    if "format binary_little_endian 1.0" in header:
        return np.frombuffer(data[end:end + 12 * n], dtype="<f4").reshape(n, 3).copy()
    rows = data[end:].decode("ascii").split()
    return np.array(rows, dtype=np.float32).reshape(n, 3)


# -- PNG ---------------------------------------------------------------------

def _chunk(tag: bytes, payload: bytes) -> bytes:
    return struct.pack(">I", len(payload)) + tag + payload + struct.pack(">I", zlib.crc32(payload, zlib.crc32(tag)))


def png_bytes(image: np.ndarray) -> bytes:
    """Encode an 8-bit gray (H, W) or RGB (H, W, 3) image.

    Settings are fixed (filter 0 on every row, zlib level 6) so equal images
    always give equal bytes.
    """
    img = np.asarray(image)
    if img.dtype != np.uint8:
        raise TypeError("PNG writer expects uint8 pixels")
    if img.ndim == 2:
        color_type, channels = 0, 1
    elif img.ndim == 3 and img.shape[2] == 3:
        color_type, channels = 2, 3
    else:
        raise ValueError(f"unsupported image shape {img.shape}")
    h, w = img.shape[:2]
    rows = np.ascontiguousarray(img).reshape(h, w * channels)
    raw = np.hstack([np.zeros((h, 1), np.uint8), rows]).tobytes()
    ihdr = struct.pack(">IIBBBBB", w, h, 8, color_type, 0, 0, 0)
    return (b"\x89PNG\r\n\x1a\n" + _chunk(b"IHDR", ihdr)
            + _chunk(b"IDAT", zlib.compress(raw, 6)) + _chunk(b"IEND", b""))


def write_png(image: np.ndarray, path: str | Path) -> None:
    data = png_bytes(image)
    with atomic_write(path, "wb") as fh:
        fh.write(data)


# -- float depth -------------------------------------------------------------

def _depth_payload(depth: np.ndarray) -> np.ndarray:
    d = np.asarray(depth, dtype=np.float32)
    if d.ndim != 2:
        raise ValueError("depth image must be 2D")
    return np.where(np.isfinite(d), d, np.float32(DEPTH_BACKGROUND)).astype("<f4")


def pfm_bytes(depth: np.ndarray) -> bytes:
    d = _depth_payload(depth)
    h, w = d.shape
    return f"Pf\n{w} {h}\n-1.0\n".encode("ascii") + d[::-1].tobytes()


def read_pfm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"Pf":
        raise ValueError("not a grayscale PFM file")
    w, h = map(int, parts[1].split())
    scale = float(parts[2])
    dtype = "<f4" if scale < 0 else ">f4"
    return np.frombuffer(parts[3][:4 * w * h], dtype=dtype).reshape(h, w)[::-1].astype(np.float32)


def _exr_attr(name: str, type_name: str, value: bytes) -> bytes:
    return name.encode() + b"\0" + type_name.encode() + b"\0" + struct.pack("<i", len(value)) + value


def exr_bytes(depth: np.ndarray) -> bytes:
    """Single-part scanline OpenEXR, one uncompressed FLOAT channel ``Z``."""
    d = _depth_payload(depth)
    h, w = d.shape
    chlist = b"Z\0" + struct.pack("<iB3xii", 2, 0, 1, 1) + b"\0"
    box = struct.pack("<iiii", 0, 0, w - 1, h - 1)
    header = b"".join([
        _exr_attr("channels", "chlist", chlist),
        _exr_attr("compression", "compression", b"\0"),
        _exr_attr("dataWindow", "box2i", box),
        _exr_attr("displayWindow", "box2i", box),
        _exr_attr("lineOrder", "lineOrder", b"\0"),
        _exr_attr("pixelAspectRatio", "float", struct.pack("<f", 1.0)),
        _exr_attr("screenWindowCenter", "v2f", struct.pack("<ff", 0.0, 0.0)),
        _exr_attr("screenWindowWidth", "float", struct.pack("<f", 1.0)),
    ]) + b"\0"
    prefix = b"\x76\x2f\x31\x01" + struct.pack("<I", 2) + header
    line_bytes = 4 * w
    block = 8 + line_bytes
    first = len(prefix) + 8 * h
    offsets = struct.pack(f"<{h}Q", *(first + y * block for y in range(h)))
    lines = b"".join(struct.pack("<ii", y, line_bytes) + d[y].tobytes() for y in range(h))
    return prefix + offsets + lines


def read_exr(path: str | Path) -> np.ndarray:
    """Read the uncompressed single-channel subset produced by :func:`exr_bytes`."""
    data = Path(path).read_bytes()
    if data[:4] != b"\x76\x2f\x31\x01":
        raise ValueError("not an OpenEXR file")
    pos = 8
    attrs: dict[str, bytes] = {}
    while data[pos] != 0:
        name_end = data.index(b"\0", pos)
        type_end = data.index(b"\0", name_end + 1)
        (size,) = struct.unpack_from("<i", data, type_end + 1)
        start = type_end + 5
        attrs[data[pos:name_end].decode()] = data[start:start + size]
        pos = start + size
    pos += 1
    if attrs["compression"] != b"\0":
        raise ValueError("only uncompressed EXR is supported")
    x0, y0, x1, y1 = struct.unpack("<iiii", attrs["dataWindow"])
    w, h = x1 - x0 + 1, y1 - y0 + 1
    offsets = struct.unpack_from(f"<{h}Q", data, pos)
    out = np.empty((h, w), np.float32)
    for off in offsets:
        y, size = struct.unpack_from("<ii", data, off)
        out[y - y0] = np.frombuffer(data, dtype="<f4", count=w, offset=off + 8)
    return out


def write_float_depth(depth: np.ndarray, path: str | Path, fmt: str = "exr") -> None:
    if fmt == "exr":
        data = exr_bytes(depth)
    elif fmt == "pfm":
        data = pfm_bytes(depth)
    else:
        raise ValueError(f"unknown float depth format {fmt!r}")
    with atomic_write(path, "wb") as fh:
        fh.write(data)


def read_float_depth(path: str | Path) -> np.ndarray:
    path = Path(path)
    return read_exr(path) if path.suffix == ".exr" else read_pfm(path)


# -- JSON --------------------------------------------------------------------

def json_text(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(obj: Any, path: str | Path) -> None:
    text = json_text(obj)
    with atomic_write(path, "w") as fh:
        fh.write(text)


def write_metadata(meta: dict, path: str | Path) -> None:
    write_json(meta, path)


def write_manifest(manifest: dict, path: str | Path) -> None:
    write_json(manifest, path)


def read_json(path: str | Path) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))
