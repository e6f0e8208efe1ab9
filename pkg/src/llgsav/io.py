"""
Persistence: snapshot files, CSV time series, metadata sidecars and the
INI-style run configuration.

Snapshot layout (little-endian)::

    b"LLF1" | u32 dims | u32 Nx | u32 Ny (1 in 1D) | f64 Lx | f64 Ly | f64 t
    | m1[Nx*Ny] | m2[Nx*Ny] | m3[Nx*Ny]          (f64, row-major, x slowest)

The grid origin is not part of the binary header; it is stored in the
``.meta`` sidecar and restored from there when present.
"""

import configparser
import csv
import dataclasses
import json
import os
import re
import struct
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import model
from . import spectral as sp
from .errors import UsageError
from .experiments import ErrorRecord, RunConfig, TimeSeriesRow, VARIANTS

MAGIC = b"LLF1"
HEADER = struct.Struct("<4sIIIddd")
TIMESERIES_SCHEMA = "llgsav-timeseries/1"
ERRORS_SCHEMA = "llgsav-errors/1"
TIMESERIES_COLUMNS = [f.name for f in dataclasses.fields(TimeSeriesRow)]


class ConfigError(UsageError):
    """Malformed or invalid configuration file."""


def meta_path(path):
    return Path(path).with_suffix(".meta")


def write_meta(path, config=None, wall_time=None, **extra):
    """Write the ``.meta`` sidecar of ``path`` and return its location."""
    meta = {"code_version": __version__, "written": time.strftime("%Y-%m-%dT%H:%M:%S%z")}
    if config is not None:
        meta["config"] = config_to_dict(config)
    if wall_time is not None:
        meta["wall_time_s"] = wall_time
    meta.update(extra)
    target = meta_path(path)
    try:
        target.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write metadata {target}: {exc}") from exc
    return target


def read_meta(path):
    target = meta_path(path)
    return json.loads(target.read_text()) if target.exists() else {}


# ---- snapshots ----

@dataclass
class Snapshot:
    grid: sp.Grid
    t: float
    m: np.ndarray


def write_snapshot(path, m, grid, t, config=None):
    m = np.asarray(m, dtype="<f8")
    if m.shape != (3,) + grid.shape:
        raise UsageError(f"snapshot field has shape {m.shape}, expected {(3,) + grid.shape}")
    nx = grid.modes[0]
    ny = grid.modes[1] if grid.dims == 2 else 1
    ly = grid.lengths[1] if grid.dims == 2 else 0.0
    header = HEADER.pack(MAGIC, grid.dims, nx, ny, grid.lengths[0], ly, float(t))
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(np.ascontiguousarray(m).tobytes(order="C"))
    except OSError as exc:
        raise OSError(f"cannot write snapshot {path}: {exc}") from exc
    write_meta(path, config, origin=list(grid.origin), time=float(t))


def read_snapshot(path):
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read snapshot {path}: {exc}") from exc
    if len(raw) < HEADER.size:
        raise UsageError(f"{path}: file too short for a snapshot header")
    magic, dims, nx, ny, lx, ly, t = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise UsageError(f"{path}: bad magic {magic!r}")
    if dims not in (1, 2):
        raise UsageError(f"{path}: unsupported dims {dims}")
    count = 3 * nx * ny
    body = np.frombuffer(raw, dtype="<f8", offset=HEADER.size)
    if body.size != count:
        raise UsageError(f"{path}: expected {count} values, found {body.size}")
    origin = read_meta(path).get("origin")
    if dims == 1:
        grid = sp.Grid((nx,), (lx,), origin)
        m = body.reshape(3, nx)
    else:
        grid = sp.Grid((nx, ny), (lx, ly), origin)
        m = body.reshape(3, nx, ny)
    return Snapshot(grid, t, m.astype(float))


def snapshot_name(t):
    return f"snapshot_t{t:.6f}.llf"


def read_snapshot_dir(directory):
    """Load every ``*.llf`` in ``directory`` as a ``{t: m}`` reference."""
    out = {}
    for path in sorted(Path(directory).glob("*.llf")):
        snap = read_snapshot(path)
        out[snap.t] = snap.m
    if not out:
        raise UsageError(f"no snapshot files found in {directory}")
    return out


# ---- CSV ----

def _fmt(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    text = f"{float(v):.17g}"
    # keep floats recognisable as floats ("1" would read back as an int)
    return text if any(c in text for c in ".eni") else text + ".0"


def write_csv(path, header, rows, schema=TIMESERIES_SCHEMA):
    """Write ``rows`` (sequences matching ``header``) with a schema comment line."""
    try:
        with open(path, "w", newline="") as fh:
            fh.write(f"# {schema}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def read_csv(path):
    """Return ``(schema, header, rows)``; integers stay ``int``, the rest ``float``."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    schema = lines[0][2:] if lines and lines[0].startswith("# ") else None
    body = lines[1:] if schema else lines
    reader = csv.reader(body)
    header = next(reader)
    rows = []
    for rec in reader:
        rows.append([int(v) if re.fullmatch(r"-?\d+", v) else float(v) for v in rec])
    return schema, header, rows


def write_timeseries(path, rows):
    write_csv(path, TIMESERIES_COLUMNS, [dataclasses.astuple(r) for r in rows])


def read_timeseries(path):
    schema, header, rows = read_csv(path)
    if schema != TIMESERIES_SCHEMA or header != TIMESERIES_COLUMNS:
        raise UsageError(f"{path}: not a {TIMESERIES_SCHEMA} file")
    return [TimeSeriesRow(*r) for r in rows]


ERROR_COLUMNS = ["dt"] + [f"{v}_{n}" for v in VARIANTS for n in ("linf_h1", "l2_h2")] + ["xi_dev"]


def write_errors(path, records):
    rows = [[r.dt] + [r[v, n] for v in VARIANTS for n in ("linf_h1", "l2_h2")] + [r.xi_dev]
            for r in records]
    write_csv(path, ERROR_COLUMNS, rows, schema=ERRORS_SCHEMA)


def read_errors(path):
    schema, header, rows = read_csv(path)
    if schema != ERRORS_SCHEMA or header != ERROR_COLUMNS:
        raise UsageError(f"{path}: not a {ERRORS_SCHEMA} file")
    out = []
    for r in rows:
        vals = iter(r[1:-1])
        errors = {v: {"linf_h1": next(vals), "l2_h2": next(vals)} for v in VARIANTS}
        out.append(ErrorRecord(r[0], errors, r[-1]))
    return out


# ---- configuration ----

SCHEMA = {
    "grid": {"dims", "modes", "lengths", "origin"},
    "params": {"gamma", "beta", "s", "k0", "w", "order", "dt", "t", "mode"},
    "problem": {"kind", "direction", "initial", "forcing_in_sav", "reference"},
    "output": {"directory", "cadence", "snapshot_times"},
    "solver": {"tol", "max_iter", "restart", "dealias", "cross_term"},
}
PARAM_KEYS = {"gamma": "gamma", "beta": "beta", "s": "S", "k0": "K0", "w": "w",
              "order": "order", "dt": "dt", "t": "T", "mode": "mode"}


@dataclass
class ConfigFile:
    run: RunConfig
    directory: str = "output"
    reference: str | None = None


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _line_of(text, section, key):
    current = None
    for no, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip().lower()
        elif current == section and re.match(rf"{re.escape(key)}\s*[=:]", s, re.IGNORECASE):
            return no
    return None


def parse_config(text, source="<config>"):
    """Parse and validate a configuration document.

    Raises
    ------
    ConfigError
        For syntax errors, unknown sections or keys, bad values, or values
        that violate the physical parameter constraints.
    """
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc

    def where(section, key):
        line = _line_of(text, section, key)
        return f"{source}:{line}" if line else source

    for section in cp.sections():
        if section.lower() not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key in cp[section]:
            if key not in SCHEMA[section.lower()]:
                raise ConfigError(f"{where(section, key)}: unknown key '{key}' in [{section}]")

    def get(section, key, conv, default=None):
        if not cp.has_option(section, key):
            return default
        raw = cp.get(section, key)
        try:
            return conv(raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{where(section, key)}: bad value for {section}.{key}: {raw!r}") from exc

    def boolean(raw):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(raw)

    params = {}
    for key, name in PARAM_KEYS.items():
        conv = int if key in ("w", "order") else (str.strip if key == "mode" else float)
        val = get("params", key, conv)
        if val is not None:
            params[name] = val
    try:
        pp = model.ProblemParams(**params)
    except UsageError as exc:
        raise ConfigError(f"{source}: [params] {exc}") from exc

    dims = get("grid", "dims", int)
    modes = get("grid", "modes", lambda s: tuple(int(float(v)) for v in _floats(s)))
    lengths = get("grid", "lengths", _floats)
    origin = get("grid", "origin", _floats)
    for name, val in (("modes", modes), ("lengths", lengths), ("origin", origin)):
        if val is not None and dims is not None and len(val) != dims:
            raise ConfigError(f"{where('grid', name)}: grid.{name} needs {dims} entries, got {len(val)}")
    if dims is not None and dims not in (1, 2):
        raise ConfigError(f"{where('grid', 'dims')}: grid.dims must be 1 or 2")

    options = {}
    direction = get("problem", "direction", _floats)
    if direction is not None:
        options["direction"] = direction
    initial = get("problem", "initial", str.strip)
    if initial is not None:
        options["initial"] = initial
    try:
        run = RunConfig(
            problem=get("problem", "kind", str.strip, "manufactured"),
            params=pp, modes=modes, lengths=lengths, origin=origin,
            dealias=get("solver", "dealias", boolean, False),
            tol=get("solver", "tol", float, 1e-12),
            max_iter=get("solver", "max_iter", int, 200),
            restart=get("solver", "restart", int, 30),
            cross_term=get("solver", "cross_term", str.strip, "unprojected"),
            forcing_in_sav=get("problem", "forcing_in_sav", boolean, True),
            cadence=get("output", "cadence", int, 1),
            snapshot_times=get("output", "snapshot_times", _floats, ()),
            options=options)
    except UsageError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    return ConfigFile(run, get("output", "directory", str.strip, "output"),
                      get("problem", "reference", str.strip))


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cf = parse_config(text, source=str(path))
    base = Path(path).parent
    # relative file references are resolved against the config's directory
    if "initial" in cf.run.options and not os.path.isabs(cf.run.options["initial"]):
        cf.run.options["initial"] = str(base / cf.run.options["initial"])
    if cf.reference and not os.path.isabs(cf.reference):
        cf.reference = str(base / cf.reference)
    return cf


def _join(vals):
    return ", ".join(_fmt(v) if not isinstance(v, float) else repr(v) for v in vals)


def config_to_dict(config):
    run = config.run if isinstance(config, ConfigFile) else config
    d = {
        "grid": {},
        "params": {key: getattr(run.params, name) for key, name in PARAM_KEYS.items()},
        "problem": {"kind": run.problem, "forcing_in_sav": run.forcing_in_sav},
        "solver": {"tol": run.tol, "max_iter": run.max_iter, "restart": run.restart,
                   "dealias": run.dealias, "cross_term": run.cross_term},
        "output": {"cadence": run.cadence, "snapshot_times": list(run.snapshot_times)},
    }
    for key in ("modes", "lengths", "origin"):
        val = getattr(run, key)
        if val is not None:
            d["grid"][key] = list(val)
    if run.modes is not None:
        d["grid"]["dims"] = len(run.modes)
    for key, val in run.options.items():
        d["problem"][key] = list(val) if isinstance(val, tuple) else val
    if isinstance(config, ConfigFile):
        d["output"]["directory"] = config.directory
        if config.reference:
            d["problem"]["reference"] = config.reference
    return d


def serialize_config(config):
    """Render a :class:`ConfigFile` (or :class:`RunConfig`) as INI text."""
    d = config_to_dict(config)
    lines = []
    for section in ("grid", "params", "problem", "solver", "output"):
        items = d[section]
        if not items:
            continue
        lines.append(f"[{section}]")
        for key, val in items.items():
            if isinstance(val, bool):
                text = "true" if val else "false"
            elif isinstance(val, (list, tuple)):
                text = _join(val)
            elif isinstance(val, float):
                text = repr(val)
            else:
                text = str(val)
            lines.append(f"{key} = {text}")
        lines.append("")
    return "\n".join(lines)
