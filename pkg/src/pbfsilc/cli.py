"""Command-line entry points: simulation, matrix export and diagnostics."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .controllability import build_report
from .errors import ConfigError, StabilityError
from .geometry import PartGeometry
from .grid import VoxelGridSpec
from .lifted import (
    Measurement,
    build_lifted_system,
    power_lookup_matrix,
    temporal_gain_matrix,
    voxel_average_matrix,
)
from .paths import generate_raster, register_samples
from .silc import LayerRecord, run_closed_loop
from .thermal import build_system, corner_pulse_decay


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_matrix_csv(path: Path, m: np.ndarray) -> None:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{m.shape[0]},{m.shape[1]}\n")
        for row in m:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_history_csv(path: Path, history: list[LayerRecord], vspec: VoxelGridSpec) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("layer,voxel_id,vx,vy,u_s,y_s,e_s\n")
        for rec in history:
            for i, vid in enumerate(rec.voxel_ids):
                v1, v2 = vspec.voxel_coords(vid)
                fh.write(
                    f"{rec.layer},{vid},{v1},{v2},"
                    f"{_fmt(rec.power[i])},{_fmt(rec.output[i])},{_fmt(rec.error[i])}\n"
                )


def write_layer_pgm(path: Path, rec: LayerRecord, vspec: VoxelGridSpec) -> tuple[float, float]:
    """Binary P5 map of the layer's voxel outputs, min-max scaled."""
    img = np.zeros((vspec.m2, vspec.m1), dtype=np.uint8)
    vals = rec.output
    lo = float(vals.min()) if len(vals) else 0.0
    hi = float(vals.max()) if len(vals) else 0.0
    span = hi - lo
    for i, vid in enumerate(rec.voxel_ids):
        v1, v2 = vspec.voxel_coords(vid)
        level = 255 if span == 0 else int(round(255 * (vals[i] - lo) / span))
        img[v2 - 1, v1 - 1] = level
    with open(path, "wb") as fh:
        fh.write(f"P5\n{vspec.m1} {vspec.m2}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
    return lo, hi


def classify_regions(
    geom: PartGeometry, layer: int, vspec: VoxelGridSpec, voxel_ids, hatch_elems: float
) -> dict[str, np.ndarray]:
    """Split a layer's voxels into center / edge / corner index masks.

    Edge voxels contain upper or lower border elements (missing in-part
    neighbor along y, where raster turnarounds land); the corner is the
    strip within ten hatch widths of the rightmost in-part element (the
    short tracks).  Everything else, including the track-start border on
    the left, counts as center.
    """
    mask = geom.layer_mask(layer)
    pad = np.pad(mask, 1, constant_values=False)
    y_border = mask & (~pad[1:-1, :-2] | ~pad[1:-1, 2:])
    d1_max = int(np.nonzero(mask)[0].max()) + 1
    corner_from = d1_max - 10.0 * hatch_elems

    edge = np.zeros(len(voxel_ids), dtype=bool)
    corner = np.zeros(len(voxel_ids), dtype=bool)
    for i, vid in enumerate(voxel_ids):
        v1, v2 = vspec.voxel_coords(vid)
        a1 = vspec.anchor1 + (v1 - 1) * vspec.size
        a2 = vspec.anchor2 + (v2 - 1) * vspec.size
        b1 = min(a1 + vspec.size - 1, mask.shape[0])
        b2 = min(a2 + vspec.size - 1, mask.shape[1])
        if b1 >= corner_from:
            corner[i] = True
        elif y_border[a1 - 1 : b1, a2 - 1 : b2].any():
            edge[i] = True
    center = ~(edge | corner)
    return {"center": center, "edge": edge, "corner": corner}


def write_summary_csv(
    path: Path, history: list[LayerRecord], geom: PartGeometry, vspec: VoxelGridSpec, hatch_elems: float
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            "layer,mean_abs_err,max_abs_err,"
            "center_out,edge_out,corner_out,center_pwr,edge_pwr,corner_pwr\n"
        )
        for rec in history:
            regions = classify_regions(geom, rec.layer, vspec, rec.voxel_ids, hatch_elems)
            cells = [f"{rec.layer}", _fmt(float(np.mean(np.abs(rec.error)))), _fmt(float(np.max(np.abs(rec.error))))]
            for series in (rec.output, rec.power):
                for name in ("center", "edge", "corner"):
                    sel = regions[name]
                    cells.append(_fmt(float(np.mean(series[sel]))) if sel.any() else "nan")
            fh.write(",".join(cells) + "\n")


def _prepare(cfg: RunConfig):
    spec = cfg.mesh_spec()
    mat = cfg.material()
    geom = cfg.part(spec)
    vspec = cfg.voxel_grid(geom)
    return spec, mat, geom, vspec


def _write_meta(outdir: Path, cfg: RunConfig, extra_lines=()):
    with open(outdir / "meta", "w", encoding="utf-8") as fh:
        fh.write(f"toolkit_version={__version__}\n")
        fh.write(cfg.as_lines())
        for line in extra_lines:
            fh.write(line + "\n")


def _run_build(cfg: RunConfig, outdir: Path, controlled: bool) -> int:
    spec, mat, geom, vspec = _prepare(cfg)
    history = run_closed_loop(
        spec,
        mat,
        geom,
        cfg.raster(),
        vspec,
        cfg.measurement(),
        cfg.silc(),
        layers=cfg.build_layers,
        lookup_mode=cfg.lookup,
        controlled=controlled,
    )
    write_history_csv(outdir / "history.csv", history, vspec)
    scale_lines = []
    for rec in history:
        lo, hi = write_layer_pgm(outdir / f"layer_{rec.layer:04d}.pgm", rec, vspec)
        scale_lines.append(f"pgm_scale_layer_{rec.layer}={_fmt(lo)},{_fmt(hi)}")
    if controlled:
        write_summary_csv(outdir / "summary.csv", history, geom, vspec, cfg.hatch / cfg.dx)
    _write_meta(outdir, cfg, scale_lines)
    return 0


def _layer_matrices(cfg: RunConfig, layer: int):
    spec, mat, geom, vspec = _prepare(cfg)
    sched = generate_raster(geom, layer, cfg.hatch, cfg.speed, spec.dt, cfg.raster().angle(layer), spec)
    sets = register_samples(sched, vspec)
    sys_m = build_system(spec, mat, geom, layer)
    meas = cfg.measurement()
    if not meas.linear:
        meas = Measurement(kind="max_temp", scale=cfg.measure_scale)
    lifted = build_lifted_system(sys_m, sched, sets, meas, lookup_mode=cfg.lookup)
    return lifted, sets


def cmd_simulate_openloop(cfg: RunConfig, outdir: Path, args) -> int:
    return _run_build(cfg, outdir, controlled=False)


def cmd_simulate_silc(cfg: RunConfig, outdir: Path, args) -> int:
    return _run_build(cfg, outdir, controlled=True)


def cmd_build_matrices(cfg: RunConfig, outdir: Path, args) -> int:
    lifted, _ = _layer_matrices(cfg, args.layer)
    write_matrix_csv(outdir / "temporal_gain.csv", lifted.temporal_gain)
    write_matrix_csv(outdir / "averaging.csv", lifted.averaging)
    write_matrix_csv(outdir / "lookup.csv", lifted.lookup)
    write_matrix_csv(outdir / "spatial_gain.csv", lifted.spatial_gain)
    _write_meta(outdir, cfg, [f"layer={args.layer}"])
    return 0


def cmd_check_controllability(cfg: RunConfig, outdir: Path, args) -> int:
    lifted, sets = _layer_matrices(cfg, args.layer)
    report = build_report(lifted.temporal_gain, sets, lookup_mode="forward")
    text = report.lines()
    sys.stdout.write(text)
    with open(outdir / "controllability.txt", "w", encoding="utf-8") as fh:
        fh.write(text)
    _write_meta(outdir, cfg, [f"layer={args.layer}"])
    return 0


def cmd_pulse_decay(cfg: RunConfig, outdir: Path, args) -> int:
    spec = cfg.mesh_spec()
    seq = corner_pulse_decay(cfg.material(), spec, cfg.pulse_samples, camera_dt=cfg.camera_dt)
    with open(outdir / "decay.csv", "w", encoding="utf-8") as fh:
        fh.write("sample,temperature,ratio\n")
        for m, v in enumerate(seq):
            ratio = _fmt(seq[m] / seq[m - 1]) if m > 0 and seq[m - 1] != 0 else "nan"
            fh.write(f"{m},{_fmt(v)},{ratio}\n")
    _write_meta(outdir, cfg)
    return 0


COMMANDS = {
    "simulate-openloop": cmd_simulate_openloop,
    "simulate-silc": cmd_simulate_silc,
    "build-matrices": cmd_build_matrices,
    "check-controllability": cmd_check_controllability,
    "pulse-decay": cmd_pulse_decay,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="pbfsilc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="key=value run configuration file")
        p.add_argument("--out", default=None, help="output directory (default from config)")
        if name in ("build-matrices", "check-controllability"):
            p.add_argument("--layer", type=int, default=1)
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    outdir = Path(args.out if args.out else cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        return COMMANDS[args.command](cfg, outdir, args)
    except (ConfigError, ValueError) as exc:
        if isinstance(exc, StabilityError):
            print(f"numerical failure: {exc}", file=sys.stderr)
            return 2
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
