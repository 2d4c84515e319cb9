"""Command-line client for the scene service.

Every subcommand builds the same request payload the HTTP API takes and either
calls the service handler in-process (default) or posts it to a running server
(--server URL). Exit codes: 0 ok, 1 validation, 2 range, 3 I/O, 4 resource
budget.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

from .errors import EXIT_BUDGET, EXIT_IO, EXIT_RANGE, EXIT_VALIDATION

_CODE_EXITS = {
    "validation": EXIT_VALIDATION,
    "range": EXIT_RANGE,
    "io": EXIT_IO,
    "budget": EXIT_BUDGET,
}


class CommandError(Exception):
    def __init__(self, code: str, detail: str):
        super().__init__(detail)
        self.code = code
        self.detail = detail


def call(route: str, payload: dict, server: Optional[str] = None) -> dict:
    """Dispatch one request, locally or against a remote server."""
    if server:
        import httpx

        r = httpx.post(server.rstrip("/") + route, json=payload, timeout=3600.0)
        if r.status_code >= 400:
            try:
                body = r.json()
            except ValueError:
                body = {"code": "validation", "detail": r.text}
            raise CommandError(body.get("code", "validation"), body.get("detail", r.text))
        return r.json()

    from pydantic import ValidationError as PydanticValidationError

    from .service.app import ROUTES, classify_error

    req_model, handler, _ = ROUTES[route]
    try:
        request = req_model(**payload)
    except PydanticValidationError as exc:
        raise CommandError("validation", str(exc)) from exc
    try:
        response = handler(request)
    except Exception as exc:  # noqa: BLE001 - classified below
        body = classify_error(exc)
        raise CommandError(body.code, body.detail) from exc
    return response.model_dump()


def _print_compress(out: dict) -> None:
    print(f"wrote {out['output_path']} ({out['bytes_on_disk']} bytes on disk)")
    print(
        f"format {out['format']}  resolution {tuple(out['resolution'])}  "
        f"frames {out['true_frame_count']} (padded {tuple(out['padded_dims'])})"
    )
    print(
        f"parameters {out['parameter_count']}  payload {out['payload_bytes']} bytes  "
        f"max rank {out['max_rank']}"
    )
    print(
        f"compression ratio {out['compression_ratio_true']:.1f}:1 (true frames), "
        f"{out['compression_ratio_padded']:.1f}:1 (padded)"
    )
    t = out["timings"]
    print(
        f"timings: frames {t['load_and_compress_frames']:.2f}s  "
        f"serialize {t['serialize']:.2f}s  total {t['total']:.2f}s"
    )


def cmd_compress(args) -> int:
    payload = {
        "input_dir": args.input,
        "output_path": args.output,
        "format": args.format,
        "max_rank_spatial": args.max_rank_spatial
        if args.max_rank_spatial is not None
        else args.max_rank,
        "max_rank_time": args.max_rank_time
        if args.max_rank_time is not None
        else args.max_rank,
        "eps_frame": args.eps,
        "eps_merge": args.eps_merge,
        "tau": args.tau,
        "tau_units": args.tau_units,
        "resolution": args.resolution,
        "scalar_width": 8 if args.f64 else 4,
        "threads": args.threads,
        "merge": args.merge,
        "pad_time_full": args.pad_time_full,
        "pad_fill": args.pad_fill,
    }
    out = call("/compress", payload, args.server)
    _print_compress(out)
    return 0


def cmd_extract(args) -> int:
    out = call(
        "/extract",
        {
            "scene_path": args.scene,
            "frame": args.frame,
            "output_path": args.output,
            "as_mesh": args.mesh,
            "iso": args.iso,
        },
        args.server,
    )
    if out["kind"] == "mesh":
        print(
            f"frame {out['frame']} -> {out['output_path']} "
            f"({out['vertices']} vertices, {out['triangles']} triangles)"
        )
    else:
        print(f"frame {out['frame']} -> {out['output_path']}")
    return 0


def cmd_query(args) -> int:
    out = call(
        "/query",
        {
            "scene_path": args.scene,
            "x": args.x,
            "y": args.y,
            "z": args.z,
            "t": args.t,
            "gradient": args.gradient,
            "trilinear": args.trilinear,
        },
        args.server,
    )
    print(f"value {out['value']:.9g}")
    if out.get("gradient") is not None:
        g = out["gradient"]
        print(f"gradient {g[0]:.9g} {g[1]:.9g} {g[2]:.9g}")
    return 0


def cmd_metrics(args) -> int:
    payload = {
        "scene_path": args.scene,
        "reference_dir": args.reference,
        "frames": args.frames,
        "samples": args.samples,
        "seed": args.seed,
        "iso": args.iso,
        "chamfer_normalized": not args.chamfer_raw,
        "hausdorff_point_to_triangle": args.hausdorff_point_to_triangle,
    }
    out = call("/metrics", payload, args.server)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as f:
            json.dump(out, f, indent=2, sort_keys=True)
    if args.csv:
        from .metrics import write_report_csv

        write_report_csv(out["per_frame"], args.csv)
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def cmd_bench(args) -> int:
    payload = {
        "output_csv": args.output,
        "resolution": args.resolution,
        "frames": args.frames,
        "tau": args.tau,
        "formats": args.formats.split(","),
        "ranks": [int(r) for r in args.ranks.split(",")],
        "samples": args.samples,
        "seed": args.seed,
    }
    out = call("/bench", payload, args.server)
    print(f"wrote {out['output_csv']} ({len(out['rows'])} rows)")
    for row in out["rows"]:
        print(
            f"  {row['format']:>9} rank {row['max_rank']:>5}  "
            f"ratio {row['ratio_true']:>9.1f}:1  l2 {row['l2']:.4g}  iou {row['iou']:.3f}"
        )
    return 0


def cmd_info(args) -> int:
    out = call("/info", {"scene_path": args.scene}, args.server)
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsdf4d",
        description="Compress time-varying signed distance volumes and query them in compressed form.",
    )
    parser.add_argument(
        "--server",
        default=None,
        help="base URL of a running service; default runs in-process",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compress", help="compress a mesh or volume sequence into a scene file")
    p.add_argument("input", help="directory of .npy volumes or .obj/.ply meshes")
    p.add_argument("-o", "--output", required=True, help="scene file to write")
    p.add_argument("--format", default="oqtt", choices=["tt", "tucker", "tt-tucker", "qtt", "oqtt"])
    p.add_argument("--max-rank", type=int, default=None, help="cap for both stages")
    p.add_argument("--max-rank-spatial", type=int, default=None, help="per-frame rank cap")
    p.add_argument("--max-rank-time", type=int, default=None, help="merge-stage rank cap")
    p.add_argument("--eps", type=float, default=None, help="relative error budget per frame")
    p.add_argument("--eps-merge", type=float, default=None, help="relative error budget per merge")
    p.add_argument("--tau", type=float, default=0.05, help="truncation distance")
    p.add_argument(
        "--tau-units",
        default="normalized",
        choices=["normalized", "world"],
        help="interpret tau as a fraction of the scene box's longest edge, or in world units",
    )
    p.add_argument("--resolution", type=int, default=64, help="grid size for mesh input")
    p.add_argument("--f64", action="store_true", help="store 64-bit scalars")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--merge", default="tree", choices=["tree", "fold"])
    p.add_argument(
        "--pad-time-full",
        action="store_true",
        help="pad the time axis to the full spatial digit count (quantized formats)",
    )
    p.add_argument(
        "--pad-fill",
        type=float,
        default=None,
        help="spatial padding value for quantized formats (default: -tau, empty space)",
    )
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("extract", help="extract one frame as a volume or mesh")
    p.add_argument("scene")
    p.add_argument("-i", "--frame", type=int, required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--mesh", action="store_true", help="run isosurface extraction, write OBJ")
    p.add_argument("--iso", type=float, default=0.0)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("query", help="evaluate the field (and gradient) at a point")
    p.add_argument("scene")
    p.add_argument("-x", type=float, required=True)
    p.add_argument("-y", type=float, required=True)
    p.add_argument("-z", type=float, required=True)
    p.add_argument("-t", type=int, default=0, help="frame index")
    p.add_argument("--gradient", action="store_true")
    p.add_argument("--trilinear", action="store_true")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("metrics", help="reconstruction quality against reference frames")
    p.add_argument("scene")
    p.add_argument("--reference", required=True, help="directory of reference frames")
    p.add_argument(
        "--frames",
        type=lambda s: [int(v) for v in s.split(",")],
        default=None,
        help="comma-separated frame list (default: first, middle, last)",
    )
    p.add_argument("--samples", type=int, default=30_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iso", type=float, default=0.0)
    p.add_argument("--chamfer-raw", action="store_true", help="report the unnormalized sum")
    p.add_argument("--hausdorff-point-to-triangle", action="store_true")
    p.add_argument("--json", default=None, help="also write the report as JSON")
    p.add_argument("--csv", default=None, help="also write per-frame rows as CSV")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("bench", help="rank sweep on a synthetic scene")
    p.add_argument("-o", "--output", required=True, help="CSV to write")
    p.add_argument("--resolution", type=int, default=32)
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--tau", type=float, default=0.05)
    p.add_argument("--formats", default="tt,oqtt", help="comma-separated format list")
    p.add_argument("--ranks", default="10,20,40", help="comma-separated rank caps")
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("info", help="print a scene file's header")
    p.add_argument("scene")
    p.set_defaults(func=cmd_info)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8440)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"error ({exc.code}): {exc.detail}", file=sys.stderr)
        return _CODE_EXITS.get(exc.code, EXIT_VALIDATION)


if __name__ == "__main__":
    sys.exit(main())
