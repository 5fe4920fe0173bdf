"""On-disk formats: CMX1 complex matrices, ASF descriptions, snapshot
batches, and estimator reports.

CMX1 is a plain-text matrix format: a header line
``# CMX1 rows=<r> cols=<c>`` followed by r lines of 2c comma-separated
decimal fields (real and imaginary parts interleaved).  Floats are
written with shortest round-trip formatting, so write -> read is exact.
"""

import sys

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from .channel import Asf, GridDensity, Rect, SampleBatch, TruncatedGaussian
from .validation import as_complex_matrix


def _fmt(x):
    return repr(float(x))


def dump_cmx(matrix, extra_comments=()):
    """Serialize a complex matrix to CMX1 text."""
    A = as_complex_matrix(matrix, "matrix")
    rows, cols = A.shape
    lines = [f"# CMX1 rows={rows} cols={cols}"]
    for r in range(rows):
        fields = []
        for c in range(cols):
            fields.append(_fmt(A[r, c].real))
            fields.append(_fmt(A[r, c].imag))
        lines.append(",".join(fields))
    lines.extend(extra_comments)
    return "\n".join(lines) + "\n"


def parse_cmx(text):
    """Parse CMX1 text; returns (matrix, trailing_comment_lines)."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# CMX1"):
        raise ValueError("not a CMX1 file (missing header)")
    header = lines[0].split()
    try:
        fields = dict(part.split("=") for part in header[2:])
        rows, cols = int(fields["rows"]), int(fields["cols"])
    except (ValueError, KeyError) as exc:
        raise ValueError(f"malformed CMX1 header: {lines[0]!r}") from exc
    if len(lines) < 1 + rows:
        raise ValueError(f"CMX1 body truncated: expected {rows} data rows")
    A = np.empty((rows, cols), dtype=np.complex128)
    for r in range(rows):
        parts = lines[1 + r].split(",")
        if len(parts) != 2 * cols:
            raise ValueError(f"CMX1 row {r} has {len(parts)} fields, expected {2 * cols}")
        vals = np.array([float(p) for p in parts])
        A[r] = vals[0::2] + 1j * vals[1::2]
    trailing = [ln for ln in lines[1 + rows:] if ln.strip()]
    return A, trailing


def write_cmx(path, matrix, extra_comments=()):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_cmx(matrix, extra_comments))


def read_cmx(path):
    with open(path, encoding="utf-8") as fh:
        matrix, _ = parse_cmx(fh.read())
    return matrix


# ---------------------------------------------------------------------------
# Snapshot batches: an M x N CMX1 matrix (columns are snapshots) plus one
# metadata line "# N0=<v> seed=<s>"


def _seed_str(seed):
    return ":".join(str(int(s)) for s in seed)


def _parse_seed(text):
    return tuple(int(s) for s in text.split(":"))


def write_batch(path, batch):
    meta = f"# N0={_fmt(batch.noise_power)} seed={_seed_str(batch.seed)}"
    write_cmx(path, batch.snapshots.T, extra_comments=[meta])


def read_batch(path):
    with open(path, encoding="utf-8") as fh:
        matrix, trailing = parse_cmx(fh.read())
    meta = {}
    for line in trailing:
        if line.startswith("#"):
            for token in line[1:].split():
                if "=" in token:
                    key, val = token.split("=", 1)
                    meta[key] = val
    if "N0" not in meta:
        raise ValueError("batch file is missing the '# N0=... seed=...' metadata line")
    return SampleBatch(
        snapshots=matrix.T,
        noise_power=float(meta["N0"]),
        seed=_parse_seed(meta.get("seed", "0")),
    )


# ---------------------------------------------------------------------------
# ASF descriptions (TOML-compatible key-value text)


def dump_asf(asf):
    lines = ["spikes = ["]
    for phi, c in asf.spikes:
        lines.append(f"    [{_fmt(phi)}, {_fmt(c)}],")
    lines.append("]")
    lines.append("pieces = [")
    for piece in asf.pieces:
        if isinstance(piece, Rect):
            lines.append(
                f'    {{kind = "rect", lo = {_fmt(piece.lo)}, hi = {_fmt(piece.hi)}, '
                f"height = {_fmt(piece.height)}}},"
            )
        elif isinstance(piece, TruncatedGaussian):
            lines.append(
                f'    {{kind = "gauss", center = {_fmt(piece.center)}, '
                f"sigma = {_fmt(piece.sigma)}, half_width = {_fmt(piece.half_width)}, "
                f"mass = {_fmt(piece.mass_total)}}},"
            )
        elif isinstance(piece, GridDensity):
            vals = ", ".join(_fmt(v) for v in piece.values)
            lines.append(f'    {{kind = "grid", values = [{vals}]}},')
        else:
            raise TypeError(f"cannot serialize ASF piece {type(piece)!r}")
    lines.append("]")
    return "\n".join(lines) + "\n"


def parse_asf(text):
    data = _toml.loads(text)
    unknown = set(data) - {"spikes", "pieces"}
    if unknown:
        raise ValueError(f"unknown ASF keys: {sorted(unknown)}")
    spikes = [(float(p), float(c)) for p, c in data.get("spikes", [])]
    pieces = []
    for entry in data.get("pieces", []):
        kind = entry.get("kind")
        if kind == "rect":
            pieces.append(Rect(entry["lo"], entry["hi"], entry["height"]))
        elif kind == "gauss":
            pieces.append(
                TruncatedGaussian(
                    entry["center"], entry["sigma"], entry["half_width"], entry["mass"]
                )
            )
        elif kind == "grid":
            pieces.append(GridDensity(tuple(entry["values"])))
        else:
            raise ValueError(f"unknown ASF piece kind {kind!r}")
    return Asf(spikes=spikes, pieces=pieces)


def write_asf(path, asf):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_asf(asf))


def read_asf(path):
    with open(path, encoding="utf-8") as fh:
        return parse_asf(fh.read())


# ---------------------------------------------------------------------------
# Estimator reports (structured key-value text)


def dump_report(report):
    lines = [
        f'method = "{report.method}"',
        f"converged = {str(bool(report.converged)).lower()}",
        f"iterations = {int(report.iterations)}",
    ]
    wall_time = getattr(report, "wall_time", None)
    if wall_time is not None:
        lines.append(f"wall_time = {_fmt(wall_time)}")
    spikes = getattr(report, "spikes", None)
    if spikes is not None:
        lines.append(f"spike_order = {spikes.order}")
        locs = ", ".join(_fmt(x) for x in spikes.locations)
        lines.append(f"spike_locations = [{locs}]")
    if getattr(report, "u", None) is not None:
        coeffs = ", ".join(_fmt(x) for x in report.u)
        lines.append(f"coefficients = [{coeffs}]")
    trace = getattr(report, "objective_trace", None)
    if trace:
        vals = ", ".join(_fmt(x) for x in trace)
        lines.append(f"objective_trace = [{vals}]")
    final_residual = getattr(report, "final_residual", None)
    if final_residual is not None:
        lines.append(f"final_residual = {_fmt(final_residual)}")
    return "\n".join(lines) + "\n"


def write_report(path, report):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_report(report))


def load_toml(path):
    with open(path, "rb") as fh:
        return _toml.load(fh)
