"""Binary sample-set and checkpoint formats, CSV reports and config hashing.

Sample-set file layout (all integers little-endian)::

    b"PMSS"  u16 version  u64 N  u64 D  u32 meta_len  meta (UTF-8 JSON)
    N*D float64 row-major  sha256 of everything before it (32 bytes)

Checkpoint layout::

    b"PMCK"  u16 version  u32 n_dims  n_dims * u32  u8 tag_len  tag (ASCII)
    i64 seed  weights then biases, each float64 row-major  sha256 (32 bytes)
"""

import csv
import hashlib
import io
import json
import math
import os
import struct

import numpy as np

from .errors import IntegrityError, InvalidInputError, UnsupportedVersionError
from .model import MlpModel
from .samples import SampleSet

SAMPLES_MAGIC = b"PMSS"
CHECKPOINT_MAGIC = b"PMCK"
FORMAT_VERSION = 1
_DIGEST = 32


def _json_safe(meta):
    out = {}
    for k, v in meta.items():
        if isinstance(v, (np.integer,)):
            v = int(v)
        elif isinstance(v, (np.floating,)):
            v = float(v)
        elif isinstance(v, np.bool_):
            v = bool(v)
        if not isinstance(v, (int, float, str, bool, type(None))):
            continue
        out[str(k)] = v
    return out


def _seal(body: bytes) -> bytes:
    return body + hashlib.sha256(body).digest()


def _unseal(blob: bytes, magic: bytes, what: str) -> memoryview:
    if len(blob) < len(magic) + 2 + _DIGEST:
        raise IntegrityError(f"{what} file is truncated")
    if blob[: len(magic)] != magic:
        raise IntegrityError(f"not a {what} file (bad magic)")
    (version,) = struct.unpack_from("<H", blob, len(magic))
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"{what} format version {version} is not supported (expected {FORMAT_VERSION})")
    body, digest = blob[:-_DIGEST], blob[-_DIGEST:]
    if hashlib.sha256(body).digest() != digest:
        raise IntegrityError(f"{what} checksum mismatch (file corrupt or truncated)")
    return memoryview(body)


def encode_sample_set(ss: SampleSet) -> bytes:
    meta = json.dumps(_json_safe(ss.meta), sort_keys=True).encode("utf-8")
    head = SAMPLES_MAGIC + struct.pack("<HQQI", FORMAT_VERSION, ss.n, ss.dim, len(meta))
    return _seal(head + meta + ss.points.astype("<f8", copy=False).tobytes(order="C"))


def decode_sample_set(blob: bytes) -> SampleSet:
    body = _unseal(bytes(blob), SAMPLES_MAGIC, "sample-set")
    off = len(SAMPLES_MAGIC)
    try:
        _, n, d, meta_len = struct.unpack_from("<HQQI", body, off)
    except struct.error as exc:
        raise IntegrityError("sample-set header is truncated") from exc
    off += struct.calcsize("<HQQI")
    if len(body) != off + meta_len + 8 * n * d:
        raise IntegrityError(f"sample-set payload size does not match N={n}, D={d}")
    try:
        meta = json.loads(bytes(body[off : off + meta_len]).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise IntegrityError("sample-set metadata block is unreadable") from exc
    off += meta_len
    pts = np.frombuffer(body, dtype="<f8", count=n * d, offset=off).astype(np.float64).reshape(n, d)
    return SampleSet(pts, meta)


def write_sample_set(path, ss: SampleSet):
    blob = encode_sample_set(ss)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)


def read_sample_set(path) -> SampleSet:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc.strerror}") from exc
    return decode_sample_set(blob)


def encode_checkpoint(model: MlpModel) -> bytes:
    tag = model.activation.encode("ascii")
    dims = model.layer_dims
    parts = [
        CHECKPOINT_MAGIC,
        struct.pack("<HI", FORMAT_VERSION, len(dims)),
        struct.pack(f"<{len(dims)}I", *dims),
        struct.pack("<B", len(tag)),
        tag,
        struct.pack("<q", int(model.seed)),
    ]
    parts += [w.astype("<f8").tobytes(order="C") for w in model.weights]
    parts += [b.astype("<f8").tobytes(order="C") for b in model.biases]
    return _seal(b"".join(parts))


def decode_checkpoint(blob: bytes) -> MlpModel:
    body = _unseal(bytes(blob), CHECKPOINT_MAGIC, "checkpoint")
    try:
        off = len(CHECKPOINT_MAGIC)
        _, n_dims = struct.unpack_from("<HI", body, off)
        off += 6
        dims = struct.unpack_from(f"<{n_dims}I", body, off)
        off += 4 * n_dims
        (tag_len,) = struct.unpack_from("<B", body, off)
        off += 1
        tag = bytes(body[off : off + tag_len]).decode("ascii")
        off += tag_len
        (seed,) = struct.unpack_from("<q", body, off)
        off += 8
    except (struct.error, UnicodeDecodeError) as exc:
        raise IntegrityError("checkpoint header is unreadable") from exc
    shapes = list(zip(dims[:-1], dims[1:]))
    need = sum(a * b + b for a, b in shapes)
    if len(body) != off + 8 * need:
        raise IntegrityError("checkpoint payload size does not match its layer dims")
    weights, biases = [], []
    for a, b in shapes:
        weights.append(np.frombuffer(body, "<f8", a * b, off).astype(np.float64).reshape(a, b))
        off += 8 * a * b
    for _, b in shapes:
        biases.append(np.frombuffer(body, "<f8", b, off).astype(np.float64))
        off += 8 * b
    return MlpModel(dims, weights, biases, tag, seed)


def write_checkpoint(path, model: MlpModel):
    with open(path, "wb") as fh:
        fh.write(encode_checkpoint(model))


def read_checkpoint(path) -> MlpModel:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc.strerror}") from exc
    return decode_checkpoint(blob)


# --- configs and CSV -------------------------------------------------------


def config_hash(config) -> str:
    """First 16 hex digits of the sha256 of the canonical JSON form."""
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise InvalidInputError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise InvalidInputError("config must be a key-value object")
    return cfg


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def csv_text(rows, config_hash_value, columns=None) -> str:
    """CSV with a trailing ``config_hash`` column on every row."""
    rows = list(rows)
    if columns is None:
        columns = []
        for r in rows:
            for k in r:
                if k not in columns:
                    columns.append(k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([*columns, "config_hash"])
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in columns] + [config_hash_value])
    return buf.getvalue()


def write_csv(path, rows, config_hash_value, columns=None):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(rows, config_hash_value, columns))


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def sample_set_to_csv(ss: SampleSet) -> str:
    """Points as CSV; metadata goes in leading ``# key=json`` lines."""
    buf = io.StringIO()
    for k, v in sorted(_json_safe(ss.meta).items()):
        buf.write(f"# {k}={json.dumps(v)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{j}" for j in range(ss.dim)])
    for row in ss.points:
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def sample_set_from_csv(text: str) -> SampleSet:
    meta, lines = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            try:
                meta[key] = json.loads(val)
            except json.JSONDecodeError as exc:
                raise InvalidInputError(f"bad metadata line {line!r}") from exc
        elif line.strip():
            lines.append(line)
    if not lines:
        raise InvalidInputError("CSV has no header row")
    reader = csv.reader(lines)
    header = next(reader)
    try:
        data = [[float(v) for v in row] for row in reader]
    except ValueError as exc:
        raise InvalidInputError(f"non-numeric CSV entry: {exc}") from exc
    if any(len(r) != len(header) for r in data):
        raise InvalidInputError("ragged CSV rows")
    pts = np.array(data, dtype=np.float64).reshape(len(data), len(header))
    return SampleSet(pts, meta)


def convert(src, dst):
    """CSV to binary or binary to CSV, chosen by the ``.csv`` extension of ``src``."""
    if str(src).endswith(".csv"):
        with open(src, encoding="utf-8") as fh:
            ss = sample_set_from_csv(fh.read())
        write_sample_set(dst, ss)
    else:
        ss = read_sample_set(src)
        with open(dst, "w", encoding="utf-8", newline="") as fh:
            fh.write(sample_set_to_csv(ss))
    return ss


def svg_line_plot(series, path, xlabel="", ylabel="", logx=False, width=640, height=420):
    """Minimal SVG with one polyline per ``(label, xs, ys, color)`` entry."""
    pad = 50
    allx = np.concatenate([np.asarray(s[1], float) for s in series])
    ally = np.concatenate([np.asarray(s[2], float) for s in series])
    tx = np.log10 if logx else (lambda v: v)
    x0, x1 = float(tx(allx.min())), float(tx(allx.max()))
    y0, y1 = 0.0, float(ally.max()) * 1.05 or 1.0
    x1 = x1 if x1 > x0 else x0 + 1.0

    def px(v):
        return pad + (float(tx(v)) - x0) / (x1 - x0) * (width - 2 * pad)

    def py(v):
        return height - pad - (float(v) - y0) / (y1 - y0) * (height - 2 * pad)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">']
    out.append(f'<rect width="{width}" height="{height}" fill="white"/>')
    out.append(f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>')
    out.append(f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>')
    out.append(f'<text x="{width / 2}" y="{height - 10}" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="15" y="{height / 2}" transform="rotate(-90 15 {height / 2})" text-anchor="middle">{ylabel}</text>')
    for i, (label, xs, ys, color) in enumerate(series):
        pts = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(xs, ys) if math.isfinite(b))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{width - pad - 150}" y="{pad + 18 * i}" fill="{color}">{label}</text>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
