"""Command-line front end: synth, embed, morph, mesh, histo, sweep, compare.

Every command writes fixed file names under ``--out``.  Exit status is 0 on
success, 1 when the computation fails and 2 on usage errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .diffgeo import curvature_fields
from .embed import Embedding, EmbeddingMethod, MissingProvenanceError, load_embedding, save_embedding
from .grid import BinaryGrid3, fit_dims, flatten_binary, synth_sphere, synth_torus
from .integrate import reports_to_csv
from .mesh import euler_from_mesh, histogram, mesh_area, mesh_volume
from .metaimage import read_header, read_volume, write_volume
from .pipeline import (
    analyse,
    analyse_embedding,
    compare_embeddings,
    default_workers,
    embed_binary,
    sigma_sweep,
    surface_mesh,
    thickness_sweep,
)
from .ply import read_ply, write_ply
from .regularize import DEFAULT_SIGMA_MM, DEFAULT_THICKNESS_MM, DEFAULT_THRESHOLD

logger = logging.getLogger("levelmorph")

METHODS = {"gauss": EmbeddingMethod.GAUSSIAN_BLUR, "sdt": EmbeddingMethod.SIGNED_DISTANCE}


class UsageError(Exception):
    pass


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _spacing(values):
    if len(values) not in (1, 3):
        raise UsageError("--spacing takes 1 or 3 values")
    return tuple(values) * 3 if len(values) == 1 else tuple(values)


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"input {path} does not exist")
    return p


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _read_binary(path: Path, fg_threshold: float) -> BinaryGrid3:
    return flatten_binary(read_volume(path), fg_threshold)


def _fmt(v) -> str:
    if v is None:
        return "undefined"
    return f"{v:.6g}" if isinstance(v, float) else str(v)


def _print_report(rep) -> None:
    rows = [
        ("volume [mm^3]", rep.volume),
        ("area [mm^2]", rep.area),
        ("total mean curvature [mm]", rep.total_mean_curvature),
        ("total Gaussian curvature", rep.total_gaussian_curvature),
        ("<H> [1/mm]", rep.avg_mean_curvature),
        ("chi (raw)", rep.euler_characteristic_raw),
        ("chi", rep.euler_characteristic),
        ("masked samples", rep.masked_samples),
    ]
    width = max(len(r[0]) for r in rows)
    print(f"{rep.method}  sigma={_fmt(rep.sigma)} T={_fmt(rep.T)} t={_fmt(rep.t)} eps={_fmt(rep.epsilon)}")
    for name, value in rows:
        print(f"  {name:<{width}}  {_fmt(value)}")


# -- commands ---------------------------------------------------------------


def cmd_synth(args) -> int:
    spacing = _spacing(args.spacing)
    if args.shape == "sphere":
        if args.radius is None:
            raise UsageError("synth sphere requires --radius")
        half = (args.radius,) * 3
    else:
        if args.inner is None or args.outer is None:
            raise UsageError("synth torus requires --inner and --outer")
        tube = 0.5 * (args.outer - args.inner)
        half = [args.outer] * 3
        half["xyz".index(args.axis)] = max(tube, 0.0)
    dims = tuple(args.dims) if args.dims else fit_dims(half, spacing, args.margin)
    if args.shape == "sphere":
        grid = synth_sphere(args.radius, args.center, dims, spacing)
    else:
        grid = synth_torus(args.inner, args.outer, args.center, args.axis, dims, spacing)
    path = write_volume(_outdir(args) / "volume.mhd", grid)
    print(f"dims {grid.dims[0]}x{grid.dims[1]}x{grid.dims[2]}, {grid.count} foreground voxels, "
          f"{grid.foreground_volume:.6g} mm^3 -> {path}")
    return 0


def cmd_embed(args) -> int:
    src = _existing(args.input)
    method = METHODS[args.method]
    if method is EmbeddingMethod.GAUSSIAN_BLUR and args.sigma is None:
        raise UsageError("--sigma is required for --method gauss")
    I = _read_binary(src, args.fg_threshold)
    margin = None if args.pad is None else (args.pad,) * 3
    e = embed_binary(I, method, args.sigma, args.T, margin=margin)
    path = save_embedding(_outdir(args) / "embedding.mhd", e)
    print(f"{method.value} embedding {e.dims[0]}x{e.dims[1]}x{e.dims[2]}, "
          f"phi in [{e.values.min():.6g}, {e.values.max():.6g}] -> {path}")
    return 0


def _looks_binary(path: Path) -> bool:
    grid = read_volume(path)
    return bool(np.all((grid.values == 0) | (grid.values == grid.values.max())))


def _resolve_input(args):
    """Return ('embedding', Embedding) or ('binary', BinaryGrid3)."""
    src = _existing(args.input)
    kind = args.kind
    if kind == "auto":
        if "levelmorph.method" in read_header(src)["comments"]:
            kind = "embedding"
        elif _looks_binary(src):
            kind = "binary"
        else:
            raise MissingProvenanceError(
                f"{src} holds a non-binary volume without embedding metadata; "
                "pass --kind embedding --method gauss|sdt to say how it was built"
            )
    if kind == "embedding":
        method = METHODS[args.method].value if args.method else None
        return kind, load_embedding(src, method, args.sigma, args.T)
    return kind, _read_binary(src, args.fg_threshold)


def cmd_morph(args) -> int:
    kind, obj = _resolve_input(args)
    workers = default_workers()
    if kind == "embedding":
        a = analyse_embedding(obj, args.t, workers)
    else:
        method = METHODS[args.method or "gauss"]
        sigma = args.sigma if args.sigma is not None else DEFAULT_SIGMA_MM
        a = analyse(obj, method, sigma if method is EmbeddingMethod.GAUSSIAN_BLUR else None,
                    args.T if args.T is not None else DEFAULT_THRESHOLD, args.t, workers)
    out = _outdir(args)
    (out / "report.json").write_text(a.report.to_json())
    (out / "report.csv").write_text(a.report.to_csv())
    _print_report(a.report)
    return 0


def cmd_mesh(args) -> int:
    src = _existing(args.input)
    channels = tuple(c for c in args.with_channels.split(",") if c) if args.with_channels else ()
    comments = read_header(src)["comments"]
    if "levelmorph.method" in comments:
        e = load_embedding(src)
    else:
        e = Embedding(read_volume(src), EmbeddingMethod.SIGNED_DISTANCE)
    fields = None
    if channels:
        fields = curvature_fields(e, principal=any(c.startswith("kappa") for c in channels),
                                  workers=default_workers())
    mesh = surface_mesh(e, fields, channels)
    if mesh.is_empty:
        logger.warning("zero level set is empty; writing an empty mesh")
    path = write_ply(_outdir(args) / "surface.ply", mesh)
    eu = euler_from_mesh(mesh)
    print(f"V={eu.V} E={eu.E} F={eu.F} chi={eu.chi} closed={eu.closed} "
          f"area={mesh_area(mesh):.6g} mm^2 volume={mesh_volume(mesh):.6g} mm^3 -> {path}")
    return 0


def cmd_histo(args) -> int:
    lo, hi = args.range
    if not lo < hi:
        raise UsageError(f"--range needs lo < hi, got {lo} {hi}")
    if args.bins < 1:
        raise UsageError("--bins must be >= 1")
    src = _existing(args.input)
    if src.suffix.lower() == ".ply":
        mesh = read_ply(src)
    else:
        e = load_embedding(src) if "levelmorph.method" in read_header(src)["comments"] else None
        if e is None:
            e = Embedding(read_volume(src), EmbeddingMethod.SIGNED_DISTANCE)
        mesh = surface_mesh(e, None, (args.channel,))
    if args.channel not in mesh.vertex_scalars:
        raise UsageError(f"mesh has no channel {args.channel!r} (has {sorted(mesh.vertex_scalars)})")
    values = mesh.vertex_scalars[args.channel]
    if values.size == 0:
        logger.warning("no vertices; writing an empty histogram")
    hist = histogram(values, args.bins, (lo, hi))
    path = _outdir(args) / "histogram.csv"
    path.write_text(hist.to_csv())
    if values.size:
        a, b = hist.mode_bin()
        print(f"{values.size} samples, mode bin [{a:.6g}, {b:.6g}), "
              f"underflow {hist.underflow}, overflow {hist.overflow} -> {path}")
    return 0


def cmd_sweep(args) -> int:
    lo, hi = args.range
    if not (0 < lo <= hi) or args.steps < 1 or (args.steps > 1 and lo == hi):
        raise UsageError("--range needs 0 < lo < hi (lo == hi only with --steps 1)")
    values = np.linspace(lo, hi, args.steps) if args.steps > 1 else np.array([lo])
    I = _read_binary(_existing(args.input), args.fg_threshold)
    workers = default_workers()
    if args.vary == "thickness":
        e = embed_binary(I, EmbeddingMethod.GAUSSIAN_BLUR, args.sigma, args.T)
        rows = thickness_sweep(e, values, workers)
    else:
        rows = sigma_sweep(I, values, args.t, args.T, workers)
    text = reports_to_csv([r for _, r in rows], extra=[{"vary": args.vary, "value": repr(v)} for v, _ in rows])
    path = _outdir(args) / "sweep.csv"
    path.write_text(text)
    for v, r in rows:
        print(f"{args.vary}={v:.6g}  V={r.volume:.6g}  A={r.area:.6g}  <H>={_fmt(r.avg_mean_curvature)}  "
              f"chi_raw={r.euler_characteristic_raw:.4f}")
    print(f"-> {path}")
    return 0


def cmd_compare(args) -> int:
    I = _read_binary(_existing(args.input), args.fg_threshold)
    res = compare_embeddings(I, args.sigma, args.t, args.T, default_workers())
    out = _outdir(args)
    payload = {
        key: {**{k: v for k, v in res[key].items() if k != "report"}, "report": res[key]["report"].to_dict()}
        for key in ("gaussian", "sdt")
    }
    payload["iqr_ratio_sdt_over_gaussian"] = res["iqr_ratio_sdt_over_gaussian"]
    (out / "compare.json").write_text(json.dumps(payload, indent=2) + "\n")
    (out / "report.csv").write_text(reports_to_csv([res["gaussian"]["report"], res["sdt"]["report"]]))
    for key in ("gaussian", "sdt"):
        _print_report(res[key]["report"])
        print(f"  vertex H IQR [1/mm]  {_fmt(res[key]['vertex_H_iqr'])}")
    print(f"IQR ratio (SDT / Gaussian): {_fmt(res['iqr_ratio_sdt_over_gaussian'])}")
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="levelmorph", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add_out(sp):
        sp.add_argument("--out", required=True, help="output directory")

    def add_fg(sp):
        sp.add_argument("--fg-threshold", type=float, default=0.5,
                        help="values above this are foreground when flattening (default 0.5)")

    s = sub.add_parser("synth", help="rasterize a synthetic sphere or torus")
    s.add_argument("shape", choices=("sphere", "torus"))
    s.add_argument("--radius", type=_positive)
    s.add_argument("--inner", type=_positive)
    s.add_argument("--outer", type=_positive)
    s.add_argument("--axis", choices=("x", "y", "z"), default="z")
    s.add_argument("--center", type=float, nargs=3)
    s.add_argument("--dims", type=int, nargs=3)
    s.add_argument("--spacing", type=_positive, nargs="+", default=[0.5])
    s.add_argument("--margin", type=float, default=2.0, help="background margin in mm when --dims is omitted")
    add_out(s)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("embed", help="embed a binary volume")
    s.add_argument("input")
    s.add_argument("--method", choices=tuple(METHODS), default="gauss")
    s.add_argument("--sigma", type=_positive)
    s.add_argument("--T", type=float, default=DEFAULT_THRESHOLD)
    s.add_argument("--pad", type=int, help="background padding in voxels (default: from sigma)")
    add_fg(s)
    add_out(s)
    s.set_defaults(func=cmd_embed)

    s = sub.add_parser("morph", help="global morphometry report")
    s.add_argument("input")
    s.add_argument("--kind", choices=("auto", "binary", "embedding"), default="auto")
    s.add_argument("--method", choices=tuple(METHODS))
    s.add_argument("--sigma", type=_positive)
    s.add_argument("--T", type=float)
    s.add_argument("--t", type=_positive, default=DEFAULT_THICKNESS_MM, help="regularization thickness (mm)")
    add_fg(s)
    add_out(s)
    s.set_defaults(func=cmd_morph)

    s = sub.add_parser("mesh", help="zero-isosurface PLY with curvature channels")
    s.add_argument("input")
    s.add_argument("--with", dest="with_channels", default="", help="comma list of H,K,kappa1,kappa2")
    add_out(s)
    s.set_defaults(func=cmd_mesh)

    s = sub.add_parser("histo", help="histogram of a vertex channel")
    s.add_argument("input", help="PLY mesh or embedding volume")
    s.add_argument("--channel", default="H")
    s.add_argument("--bins", type=int, default=100)
    s.add_argument("--range", type=float, nargs=2, default=(-0.2, 0.2), metavar=("LO", "HI"))
    add_out(s)
    s.set_defaults(func=cmd_histo)

    s = sub.add_parser("sweep", help="morphometry over sigma or thickness")
    s.add_argument("input")
    s.add_argument("--vary", choices=("sigma", "thickness"), required=True)
    s.add_argument("--range", type=float, nargs=2, required=True, metavar=("LO", "HI"))
    s.add_argument("--steps", type=int, default=10)
    s.add_argument("--sigma", type=_positive, default=DEFAULT_SIGMA_MM)
    s.add_argument("--t", type=_positive, default=DEFAULT_THICKNESS_MM)
    s.add_argument("--T", type=float, default=DEFAULT_THRESHOLD)
    add_fg(s)
    add_out(s)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("compare", help="Gaussian vs signed-distance embedding")
    s.add_argument("input")
    s.add_argument("--sigma", type=_positive, default=DEFAULT_SIGMA_MM)
    s.add_argument("--t", type=_positive, default=DEFAULT_THICKNESS_MM)
    s.add_argument("--T", type=float, default=DEFAULT_THRESHOLD)
    add_fg(s)
    add_out(s)
    s.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"levelmorph {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"levelmorph {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
