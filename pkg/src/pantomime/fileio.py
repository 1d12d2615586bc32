"""On-disk formats: motion container, model artifacts, fits, CSV, point-light SVG.

Everything binary goes through one self-describing container so there is a
single byte layout to document and test:

    offset 0   4 bytes   magic b"PMC1"
    offset 4   uint32    header length H (little-endian)
    offset 8   H bytes   UTF-8 JSON header
    offset 8+H ...       block payloads, concatenated in header order

The header carries {"kind", "version", "meta", "blocks"} where each block
entry is {"name", "dtype", "shape"} and dtype is an explicit little-endian
numpy dtype string ("<f8" or "<i8"). Payload bytes are raw C-order array
data, so write-then-read is bit-exact by construction.

Text outputs (CSV, SVG, JSON) are deterministic: floats are rendered with
repr (shortest round-trip form), JSON keys are sorted, and no timestamps or
environment facts leak into the bytes except the explicit generated_at field
of experiment reports.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import FileFormatError, UsageError
from .fitting import FitCollection, FitOptions, FitResult, FitWeights
from .kinematics import MotionSequence, ParamSequence, Skeleton
from .priors import model_from_payload, model_to_payload
from .synthdata import Corpus, CorpusConfig

MAGIC = b"PMC1"
FORMAT_VERSION = 1

_ALLOWED_DTYPES = ("<f8", "<i8")


# === generic container ===

def write_container(path: str, kind: str, meta: dict, blocks: dict) -> None:
    """Write one container file. `blocks` maps name -> ndarray (float64 or
    int64); insertion order fixes the payload order."""
    entries = []
    payloads = []
    for name, arr in blocks.items():
        a = np.ascontiguousarray(arr)
        if a.dtype.kind == "f":
            a = a.astype("<f8")
        elif a.dtype.kind in ("i", "u", "b"):
            a = a.astype("<i8")
        else:
            raise UsageError(f"write_container: block '{name}' has dtype {a.dtype}")
        entries.append({"name": name, "dtype": a.dtype.str, "shape": list(a.shape)})
        payloads.append(a.tobytes())
    header = {
        "kind": kind,
        "version": FORMAT_VERSION,
        "meta": meta,
        "blocks": entries,
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(hbytes)))
        fh.write(hbytes)
        for p in payloads:
            fh.write(p)


def read_container(path: str, expect_kind: str = None):
    """Read one container file -> (kind, meta, blocks dict of ndarrays)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 8 or raw[:4] != MAGIC:
        raise FileFormatError(f"{path}: not a pantomime container (bad magic)")
    (hlen,) = struct.unpack("<I", raw[4:8])
    if len(raw) < 8 + hlen:
        raise FileFormatError(f"{path}: truncated header")
    try:
        header = json.loads(raw[8:8 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FileFormatError(f"{path}: unreadable header ({e})")
    version = header.get("version")
    if version != FORMAT_VERSION:
        raise FileFormatError(f"{path}: unsupported container version {version}")
    kind = header.get("kind")
    if expect_kind is not None and kind != expect_kind:
        raise FileFormatError(f"{path}: kind '{kind}', expected '{expect_kind}'")
    blocks = {}
    offset = 8 + hlen
    for entry in header.get("blocks", []):
        dtype = entry.get("dtype")
        if dtype not in _ALLOWED_DTYPES:
            raise FileFormatError(f"{path}: block dtype '{dtype}' not allowed")
        shape = tuple(int(s) for s in entry["shape"])
        nbytes = int(np.prod(shape, dtype=np.int64)) * np.dtype(dtype).itemsize
        if offset + nbytes > len(raw):
            raise FileFormatError(f"{path}: truncated block '{entry['name']}'")
        arr = np.frombuffer(raw, dtype=dtype, count=int(np.prod(shape, dtype=np.int64)),
                            offset=offset).reshape(shape).copy()
        blocks[entry["name"]] = arr
        offset += nbytes
    if offset != len(raw):
        raise FileFormatError(f"{path}: {len(raw) - offset} trailing bytes")
    return kind, header.get("meta", {}), blocks


# === motion files ===

@dataclass
class MotionFile:
    """One motion sequence plus its labels, optional ground-truth parameters,
    and optional provenance (anonymizer settings, source hashes, ...)."""

    sequence: MotionSequence
    point_names: tuple = ()
    params: ParamSequence = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.point_names:
            self.point_names = tuple(
                f"p{i:02d}" for i in range(self.sequence.num_points)
            )
        if len(self.point_names) != self.sequence.num_points:
            raise UsageError(
                f"MotionFile: {len(self.point_names)} point names for "
                f"{self.sequence.num_points} points"
            )
        if self.params is not None and self.params.num_frames != self.sequence.num_frames:
            raise UsageError("MotionFile: params frame count != sequence frame count")


def write_motion_file(path: str, mf: MotionFile) -> None:
    seq = mf.sequence
    meta = {
        "subject_id": seq.subject_id,
        "action": seq.action,
        "fps": float(seq.fps),
        "num_frames": seq.num_frames,
        "num_points": seq.num_points,
        "point_names": list(mf.point_names),
        "has_params": mf.params is not None,
        "provenance": mf.provenance,
    }
    blocks = {"frames": seq.frames}
    if mf.params is not None:
        blocks["root"] = mf.params.root
        blocks["root_orient"] = mf.params.root_orient
        blocks["pose"] = mf.params.pose
        blocks["shape"] = mf.params.shape
    write_container(path, "motion", meta, blocks)


def read_motion_file(path: str) -> MotionFile:
    _, meta, blocks = read_container(path, expect_kind="motion")
    frames = blocks.get("frames")
    if frames is None:
        raise FileFormatError(f"{path}: missing frames block")
    t, p = int(meta.get("num_frames", -1)), int(meta.get("num_points", -1))
    if frames.shape != (t, p, 3):
        raise FileFormatError(
            f"{path}: declared {t}x{p} points but frames block is {frames.shape}"
        )
    seq = MotionSequence(
        frames=frames,
        fps=float(meta["fps"]),
        subject_id=str(meta["subject_id"]),
        action=str(meta["action"]),
    )
    params = None
    if meta.get("has_params"):
        params = ParamSequence(
            root=blocks["root"],
            root_orient=blocks["root_orient"],
            pose=blocks["pose"],
            shape=blocks["shape"],
        )
    return MotionFile(
        sequence=seq,
        point_names=tuple(meta.get("point_names", ())),
        params=params,
        provenance=dict(meta.get("provenance", {})),
    )


# === corpus directories ===

MANIFEST_NAME = "manifest.json"


def corpus_file_name(index: int, seq_id: str) -> str:
    return f"{index:04d}_{seq_id}.pmo"


def write_corpus_dir(dirpath, corpus: Corpus, provenance: dict = None) -> list:
    """Write every sequence as a MotionFile (with ground truth) plus a
    manifest holding the config, labels, and seeds. Returns file names."""
    import os

    os.makedirs(dirpath, exist_ok=True)
    names = []
    point_names = tuple(corpus.skeleton.joint_names)
    for i, (seq, params, sid) in enumerate(
        zip(corpus.sequences, corpus.params, corpus.seq_ids)
    ):
        name = corpus_file_name(i, sid)
        mf = MotionFile(
            sequence=seq,
            point_names=point_names,
            params=params,
            provenance=dict(provenance or {}),
        )
        write_motion_file(os.path.join(dirpath, name), mf)
        names.append(name)
    manifest = {
        "config": _config_to_dict(corpus.config),
        "content_hash": corpus.content_hash(),
        "files": [
            {
                "file": names[i],
                "seq_id": corpus.seq_ids[i],
                "subject_id": corpus.subject_ids[i],
                "action": corpus.action_labels[i],
                "noise_seed": int(corpus.noise_seeds[i]),
            }
            for i in range(len(names))
        ],
    }
    with open(os.path.join(dirpath, MANIFEST_NAME), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return names


def _config_to_dict(config: CorpusConfig) -> dict:
    d = asdict(config)
    d["actions"] = list(d["actions"])
    return d


def config_from_dict(d: dict) -> CorpusConfig:
    d = dict(d)
    d["actions"] = tuple(d["actions"])
    return CorpusConfig(**d)


def load_corpus_dir(dirpath, skel: Skeleton, verify_hash: bool = True) -> Corpus:
    """Rebuild a Corpus from a written directory. Identity profiles are a
    generation-time detail and stay empty; everything downstream works from
    sequences, params, and labels."""
    import os

    mpath = os.path.join(dirpath, MANIFEST_NAME)
    if not os.path.exists(mpath):
        raise FileFormatError(f"{dirpath}: no {MANIFEST_NAME}")
    with open(mpath, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    config = config_from_dict(manifest["config"])
    sequences, params, seq_ids, subject_ids, actions, seeds = [], [], [], [], [], []
    for row in manifest["files"]:
        mf = read_motion_file(os.path.join(dirpath, row["file"]))
        if mf.params is None:
            raise FileFormatError(f"{row['file']}: corpus files need ground truth")
        sequences.append(mf.sequence)
        params.append(mf.params)
        seq_ids.append(row["seq_id"])
        subject_ids.append(row["subject_id"])
        actions.append(row["action"])
        seeds.append(int(row["noise_seed"]))
    corpus = Corpus(
        config=config,
        skeleton=skel,
        profiles=[],
        sequences=sequences,
        params=params,
        seq_ids=seq_ids,
        subject_ids=subject_ids,
        action_labels=actions,
        noise_seeds=seeds,
    )
    if verify_hash and corpus.content_hash() != manifest["content_hash"]:
        raise FileFormatError(f"{dirpath}: content hash mismatch")
    return corpus


# === prior model artifacts ===

def save_prior_model(path: str, model, corpus_hash: str = "") -> None:
    meta, blocks = model_to_payload(model)
    meta = dict(meta)
    meta["corpus_hash"] = corpus_hash
    write_container(path, "prior-model", meta, {
        "encoder_params": blocks["encoder_params"],
        "decoder_params": blocks["decoder_params"],
    })


def load_prior_model(path: str):
    """Returns (model, corpus_hash)."""
    _, meta, blocks = read_container(path, expect_kind="prior-model")
    model = model_from_payload(meta, blocks)
    return model, str(meta.get("corpus_hash", ""))


# === fit collections ===

def save_fit_collection(path: str, fits: FitCollection, corpus_hash: str = "") -> None:
    """Sequences may differ in length, so per-frame arrays are concatenated
    along time with a lengths vector to cut them back apart."""
    n = len(fits.results)
    lengths = np.array([r.params.num_frames for r in fits.results], dtype=np.int64)
    meta = {
        "corpus_hash": corpus_hash,
        "prior_kind": fits.prior_kind,
        "weights": asdict(fits.weights),
        "options": asdict(fits.options),
        "failed_indices": [int(i) for i in fits.failed_indices],
        "loss_parts": [
            {k: float(v) for k, v in sorted(r.loss_parts.items())}
            for r in fits.results
        ],
        "failure_reasons": [r.failure_reason for r in fits.results],
        "num_results": n,
    }
    blocks = {
        "lengths": lengths,
        "root": np.concatenate([r.params.root for r in fits.results], axis=0),
        "root_orient": np.concatenate([r.params.root_orient for r in fits.results], axis=0),
        "pose": np.concatenate([r.params.pose for r in fits.results], axis=0),
        "shape": np.stack([r.params.shape for r in fits.results], axis=0),
        "per_frame_rmse": np.concatenate([r.per_frame_rmse for r in fits.results], axis=0),
        "total_loss": np.array([r.total_loss for r in fits.results]),
        "rmse": np.array([r.rmse for r in fits.results]),
        "iterations": np.array([r.iterations for r in fits.results], dtype=np.int64),
        "converged": np.array([r.converged for r in fits.results], dtype=np.int64),
        "failed": np.array([r.failed for r in fits.results], dtype=np.int64),
        "seed": np.array([r.seed for r in fits.results], dtype=np.int64),
        "wall_seconds": np.array([r.wall_seconds for r in fits.results]),
        "fps": np.array([r.fps for r in fits.results]),
    }
    write_container(path, "fit-collection", meta, blocks)


def load_fit_collection(path: str):
    """Returns (fits, corpus_hash)."""
    _, meta, blocks = read_container(path, expect_kind="fit-collection")
    n = int(meta["num_results"])
    lengths = blocks["lengths"]
    if lengths.shape != (n,):
        raise FileFormatError(f"{path}: lengths block does not match num_results")
    starts = np.concatenate([[0], np.cumsum(lengths)])
    results = []
    for i in range(n):
        a, b = int(starts[i]), int(starts[i + 1])
        params = ParamSequence(
            root=blocks["root"][a:b],
            root_orient=blocks["root_orient"][a:b],
            pose=blocks["pose"][a:b],
            shape=blocks["shape"][i],
        )
        results.append(FitResult(
            params=params,
            total_loss=float(blocks["total_loss"][i]),
            loss_parts=dict(meta["loss_parts"][i]),
            iterations=int(blocks["iterations"][i]),
            converged=bool(blocks["converged"][i]),
            failed=bool(blocks["failed"][i]),
            failure_reason=str(meta["failure_reasons"][i]),
            per_frame_rmse=blocks["per_frame_rmse"][a:b],
            rmse=float(blocks["rmse"][i]),
            prior_kind=str(meta["prior_kind"]),
            seed=int(blocks["seed"][i]),
            wall_seconds=float(blocks["wall_seconds"][i]),
            fps=float(blocks["fps"][i]),
        ))
    fits = FitCollection(
        results=results,
        failed_indices=[int(i) for i in meta["failed_indices"]],
        prior_kind=str(meta["prior_kind"]),
        weights=FitWeights(**meta["weights"]),
        options=FitOptions(**meta["options"]),
    )
    return fits, str(meta.get("corpus_hash", ""))


# === CSV ===

def format_cell(value) -> str:
    """Deterministic cell text: repr for floats (shortest round-trip form),
    plain str for ints and strings, empty for None."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: str, columns: list, rows: list) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([str(c) for c in columns])
        for row in rows:
            if len(row) != len(columns):
                raise UsageError(
                    f"write_csv: row has {len(row)} cells, header has {len(columns)}"
                )
            w.writerow([format_cell(v) for v in row])


def read_csv(path: str):
    """Returns (columns, rows) with every cell as a string."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        r = csv.reader(fh)
        try:
            columns = next(r)
        except StopIteration:
            raise FileFormatError(f"{path}: empty CSV")
        rows = [row for row in r]
    return columns, rows


def table_to_csv_text(columns: list, rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([str(c) for c in columns])
    for row in rows:
        w.writerow([format_cell(v) for v in row])
    return buf.getvalue()


# === experiment report directories ===

INDEX_NAME = "index.json"


def write_experiment_report(root, report) -> str:
    """One folder per experiment id: config.json plus one CSV per table.
    Updates the top-level index. Returns the report directory path."""
    import os

    outdir = os.path.join(root, report.experiment_id)
    os.makedirs(outdir, exist_ok=True)
    snapshot = {
        "experiment_id": report.experiment_id,
        "config": report.config,
        "generated_at": report.generated_at,
        "tables": sorted(report.tables.keys()),
    }
    with open(os.path.join(outdir, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(snapshot, fh, sort_keys=True, indent=2)
        fh.write("\n")
    for name in sorted(report.tables.keys()):
        table = report.tables[name]
        write_csv(os.path.join(outdir, f"{name}.csv"), table["columns"], table["rows"])
    _update_index(root, report.experiment_id, report.generated_at)
    return outdir


def _update_index(root, experiment_id: str, generated_at: str) -> None:
    import os

    path = os.path.join(root, INDEX_NAME)
    entries = {}
    if os.path.exists(path):
        with open(path, "r", encoding="utf-8") as fh:
            for e in json.load(fh).get("runs", []):
                entries[e["experiment_id"]] = e
    entries[experiment_id] = {
        "experiment_id": experiment_id,
        "path": experiment_id,
        "generated_at": generated_at,
    }
    doc = {"runs": [entries[k] for k in sorted(entries)]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


# === point-light export ===

SVG_WIDTH = 640
SVG_HEIGHT = 480
SVG_MARGIN = 24.0
DOT_RADIUS = 4.0


def project_orthographic(frames: np.ndarray):
    """Sagittal orthographic projection: u = forward (y), v = up (z)."""
    return frames[..., 1], frames[..., 2]


def pointlight_svg(frame: np.ndarray, bounds) -> str:
    """One frame as white dots on a black background. `bounds` is the shared
    (u_min, u_max, v_min, v_max) box so frames of one export share a camera."""
    u, v = project_orthographic(frame)
    u_min, u_max, v_min, v_max = bounds
    du = max(u_max - u_min, 1e-6)
    dv = max(v_max - v_min, 1e-6)
    scale = min((SVG_WIDTH - 2 * SVG_MARGIN) / du, (SVG_HEIGHT - 2 * SVG_MARGIN) / dv)
    ox = (SVG_WIDTH - scale * du) / 2.0
    oy = (SVG_HEIGHT - scale * dv) / 2.0
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" '
        f'height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">',
        f'<rect width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="#000000"/>',
    ]
    for j in range(frame.shape[0]):
        x = ox + scale * (float(u[j]) - u_min)
        y = SVG_HEIGHT - (oy + scale * (float(v[j]) - v_min))
        lines.append(
            f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{DOT_RADIUS}" fill="#ffffff"/>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def export_pointlight(outdir, mf: MotionFile, stride: int = 10):
    """Write frame_NNNN.svg per sampled frame plus points.csv of the 2-d
    projections. A stride beyond the clip length still samples frame 0."""
    import os

    if stride < 1:
        raise UsageError(f"export_pointlight: stride must be >= 1, got {stride}")
    os.makedirs(outdir, exist_ok=True)
    frames = mf.sequence.frames
    sampled = list(range(0, frames.shape[0], stride))
    u, v = project_orthographic(frames[sampled])
    bounds = (float(u.min()), float(u.max()), float(v.min()), float(v.max()))
    written = []
    for k, t in enumerate(sampled):
        name = f"frame_{t:04d}.svg"
        with open(os.path.join(outdir, name), "w", encoding="utf-8") as fh:
            fh.write(pointlight_svg(frames[t], bounds))
        written.append(name)
    rows = []
    for k, t in enumerate(sampled):
        for j in range(frames.shape[1]):
            rows.append([t, j, mf.point_names[j], float(u[k, j]), float(v[k, j])])
    write_csv(os.path.join(outdir, "points.csv"),
              ["frame", "point", "name", "u", "v"], rows)
    return written


# === line plots ===

PLOT_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")
PLOT_WIDTH = 640
PLOT_HEIGHT = 480
PLOT_PAD_L = 64.0
PLOT_PAD_R = 16.0
PLOT_PAD_T = 16.0
PLOT_PAD_B = 48.0


def _ticks(lo: float, hi: float, n: int = 5):
    return [lo + (hi - lo) * k / (n - 1) for k in range(n)]


def line_plot_svg(series: list, x_label: str = "", y_label: str = "") -> str:
    """Deterministic polyline plot. `series` is a list of dicts with keys
    label, x, y. Axes cover the joint data range with a small pad."""
    if not series:
        raise UsageError("line_plot_svg: need at least one series")
    xs = np.concatenate([np.asarray(s["x"], dtype=np.float64) for s in series])
    ys = np.concatenate([np.asarray(s["y"], dtype=np.float64) for s in series])
    if xs.size == 0:
        raise UsageError("line_plot_svg: series are empty")
    x_lo, x_hi = float(xs.min()), float(xs.max())
    y_lo, y_hi = float(ys.min()), float(ys.max())
    if x_hi - x_lo < 1e-12:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    if y_hi - y_lo < 1e-12:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    pw = PLOT_WIDTH - PLOT_PAD_L - PLOT_PAD_R
    ph = PLOT_HEIGHT - PLOT_PAD_T - PLOT_PAD_B

    def px(x):
        return PLOT_PAD_L + pw * (x - x_lo) / (x_hi - x_lo)

    def py(y):
        return PLOT_PAD_T + ph * (1.0 - (y - y_lo) / (y_hi - y_lo))

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{PLOT_WIDTH}" '
        f'height="{PLOT_HEIGHT}" viewBox="0 0 {PLOT_WIDTH} {PLOT_HEIGHT}" '
        f'font-family="sans-serif" font-size="12">',
        f'<rect width="{PLOT_WIDTH}" height="{PLOT_HEIGHT}" fill="#ffffff"/>',
        f'<rect x="{PLOT_PAD_L}" y="{PLOT_PAD_T}" width="{pw}" height="{ph}" '
        f'fill="none" stroke="#333333"/>',
    ]
    for t in _ticks(x_lo, x_hi):
        x = px(t)
        lines.append(f'<line x1="{x:.2f}" y1="{PLOT_PAD_T + ph:.2f}" '
                     f'x2="{x:.2f}" y2="{PLOT_PAD_T + ph + 5:.2f}" stroke="#333333"/>')
        lines.append(f'<text x="{x:.2f}" y="{PLOT_PAD_T + ph + 18:.2f}" '
                     f'text-anchor="middle">{t:.3g}</text>')
    for t in _ticks(y_lo, y_hi):
        y = py(t)
        lines.append(f'<line x1="{PLOT_PAD_L - 5:.2f}" y1="{y:.2f}" '
                     f'x2="{PLOT_PAD_L:.2f}" y2="{y:.2f}" stroke="#333333"/>')
        lines.append(f'<text x="{PLOT_PAD_L - 8:.2f}" y="{y + 4:.2f}" '
                     f'text-anchor="end">{t:.3g}</text>')
    if x_label:
        lines.append(f'<text x="{PLOT_PAD_L + pw / 2:.2f}" '
                     f'y="{PLOT_HEIGHT - 8:.2f}" text-anchor="middle">{x_label}</text>')
    if y_label:
        yc = PLOT_PAD_T + ph / 2
        lines.append(f'<text x="14" y="{yc:.2f}" text-anchor="middle" '
                     f'transform="rotate(-90 14 {yc:.2f})">{y_label}</text>')
    for k, s in enumerate(series):
        color = PLOT_PALETTE[k % len(PLOT_PALETTE)]
        pts = " ".join(
            f"{px(float(x)):.2f},{py(float(y)):.2f}"
            for x, y in zip(s["x"], s["y"])
        )
        lines.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        ly = PLOT_PAD_T + 16 + 16 * k
        lines.append(f'<line x1="{PLOT_PAD_L + pw - 120:.2f}" y1="{ly - 4:.2f}" '
                     f'x2="{PLOT_PAD_L + pw - 104:.2f}" y2="{ly - 4:.2f}" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        lines.append(f'<text x="{PLOT_PAD_L + pw - 100:.2f}" y="{ly:.2f}">'
                     f'{s["label"]}</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def write_line_plot(path: str, series: list, x_label: str = "",
                    y_label: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(line_plot_svg(series, x_label=x_label, y_label=y_label))


def file_sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
