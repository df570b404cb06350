"""``polywalk`` command line client.

Each subcommand builds a service request, dispatches it in-process or to a
running server (``--server URL``) and handles the local files.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from polywalk.service import handlers
from polywalk.service import schemas as S

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("polywalk")

# name -> (handler, response model, route)
ENDPOINTS = {
    "grid": (handlers.grid, S.ManifestResponse, "/grid"),
    "ground-truth": (handlers.ground_truth, S.GroundTruthResponse, "/ground-truth"),
    "sample": (handlers.sample, S.SampleResponse, "/sample"),
    "bench": (handlers.run_bench, S.BenchResponse, "/bench"),
    "report": (handlers.report, S.ReportResponse, "/report"),
    "diagnose": (handlers.diagnose, S.DiagnoseResponse, "/diagnose"),
}


class Client:
    """Dispatches requests locally, or over HTTP when ``server`` is set."""

    def __init__(self, server: str | None = None, timeout: float | None = None):
        self.server = server.rstrip("/") if server else None
        self.timeout = timeout

    def call(self, name: str, req):
        handler, resp_cls, route = ENDPOINTS[name]
        if self.server is None:
            return handler(req)
        import httpx

        r = httpx.post(self.server + route, content=req.model_dump_json(),
                       headers={"content-type": "application/json"}, timeout=self.timeout)
        if r.status_code >= 400:
            raise SystemExit(f"server error {r.status_code}: {r.text}")
        return resp_cls.model_validate_json(r.text)


def load_config(path: str | Path) -> dict:
    """Read a JSON or TOML config. Keys mirror long flag names; a table named
    after a subcommand holds settings for that subcommand only."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        return tomllib.loads(text)
    return json.loads(text)


def _norm(cfg: dict) -> dict:
    return {k.replace("-", "_"): v for k, v in cfg.items() if not isinstance(v, dict)}


def _write_json(path: str | Path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _run_settings(args) -> S.RunSettings:
    return S.RunSettings(
        n_kept=args.n_kept, thin=args.thin, burn_in=args.burn_in, n_chains=args.chains,
        seed=args.seed, executor=args.executor, squared_metric=args.squared_metric,
        paper_scale=args.paper_scale,
    )


def cmd_grid(client: Client, args) -> int:
    filters: dict[str, list[str]] = {}
    for item in args.filter or []:
        if "=" not in item:
            raise SystemExit(f"bad filter {item!r}; expected key=value")
        k, v = item.split("=", 1)
        filters.setdefault(k.strip(), []).extend(x.strip() for x in v.split(","))
    resp = client.call("grid", S.GridRequest(filters=filters))
    _write_json(args.out, {"version": resp.version, "problems": resp.problems})
    print(f"{resp.count} problems -> {args.out}")
    return 0


def cmd_ground_truth(client: Client, args) -> int:
    manifest = json.loads(Path(args.manifest).read_text())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for pid in manifest["problems"]:
        req = S.GroundTruthRequest(problems=[pid], paper_scale=args.paper_scale,
                                   base_len=args.base_len, min_steps=args.min_steps,
                                   n_walkers=args.walkers, seed=args.seed)
        resp = client.call("ground-truth", req)
        _write_json(out / f"{pid}.json", resp.histograms[pid].model_dump())
        print(f"ground truth {pid}")
    return 0


def cmd_sample(client: Client, args) -> int:
    from polywalk.io import write_samples

    req = S.SampleRequest(problem=args.problem, sampler=args.sampler, step=args.step,
                          run=_run_settings(args))
    resp = client.call("sample", req)
    meta = {
        "problem": resp.problem,
        "sampler": resp.sampler,
        "step": resp.step,
        "seed": resp.seed,
        "config": req.run.model_dump(),
        "stats": [s.model_dump() for s in resp.stats],
    }
    write_samples(args.out, resp.chains, args.format, meta)
    if args.format == "csv":
        _write_json(str(args.out) + ".meta.json", meta)
    print(f"{sum(len(c) for c in resp.chains)} samples -> {args.out}")
    return 0


def cmd_bench(client: Client, args) -> int:
    from polywalk.bench import write_records, RunRecord

    manifest = json.loads(Path(args.manifest).read_text())
    gt_dir = Path(args.gt)
    gts = {}
    for pid in manifest["problems"]:
        path = gt_dir / f"{pid}.json"
        if not path.exists():
            raise SystemExit(f"missing ground truth {path}")
        gts[pid] = S.HistogramModel.model_validate_json(path.read_text())
    samplers = [s.strip() for s in args.samplers.split(",") if s.strip()]
    steps = [float(s) for s in args.steps.split(",")] if args.steps else None
    req = S.BenchRequest(problems=manifest["problems"], samplers=samplers, steps=steps,
                         ground_truth=gts, run=_run_settings(args))
    resp = client.call("bench", req)
    out = Path(args.out)
    write_records([RunRecord(**r.model_dump()) for r in resp.best], out)
    all_path = out.with_name(out.stem + "_all" + out.suffix)
    write_records([RunRecord(**r.model_dump()) for r in resp.all], all_path)
    print(f"{len(resp.best)} best records -> {out}; {len(resp.all)} runs -> {all_path}")
    return 0


def cmd_report(client: Client, args) -> int:
    from polywalk.bench import read_records, write_tables

    records = read_records(args.results)
    req = S.ReportRequest(records=[S.RunRecordModel(**r.__dict__) for r in records])
    resp = client.call("report", req)
    for p in write_tables(resp.tables, args.out):
        print(p)
    return 0


def cmd_diagnose(client: Client, args) -> int:
    from polywalk.io import read_samples, read_sidecar

    chains = read_samples(args.samples)
    meta = read_sidecar(args.samples)
    if not meta and Path(str(args.samples) + ".meta.json").exists():
        meta = json.loads(Path(str(args.samples) + ".meta.json").read_text())
    stats = meta.get("stats", [])
    gt = S.HistogramModel.model_validate_json(Path(args.gt).read_text()) if args.gt else None
    n_steps = sum(s["n_steps"] for s in stats)
    req = S.DiagnoseRequest(
        chains=[c.tolist() for c in chains],
        ground_truth=gt,
        wall_time=sum(s["wall_time"] for s in stats) or None,
        acceptance_rate=(sum(s["acceptance_rate"] * s["n_steps"] for s in stats) / n_steps
                         if n_steps else None),
        degenerate_events=sum(s["n_degenerate"] for s in stats),
    )
    resp = client.call("diagnose", req)
    print(resp.model_dump_json(indent=2))
    return 0


def cmd_serve(client: Client, args) -> int:
    import uvicorn

    uvicorn.run("polywalk.service.app:app", host=args.host, port=args.port, log_level="info")
    return 0


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-kept", type=int, default=None, help="samples kept per chain")
    p.add_argument("--thin", type=int, default=None, help="thinning factor (default d)")
    p.add_argument("--burn-in", type=int, default=0)
    p.add_argument("--chains", type=int, default=4)
    p.add_argument("--executor", choices=("serial", "thread", "process"), default="serial")
    p.add_argument("--squared-metric", choices=("scaled_squared", "squared"),
                   default="scaled_squared", help="metric for funnel and bowtie")
    p.add_argument("--paper-scale", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polywalk", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON or TOML file with flag defaults")
    parser.add_argument("--server", help="dispatch to a running polywalk service")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("grid", help="write a problem manifest")
    p.add_argument("--filter", action="append", metavar="KEY=V1,V2",
                   help="restrict an axis: density, d, sigma, log_sigma, polytope, theta")
    p.add_argument("--out", default="manifest.json")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("ground-truth", help="reference histograms for a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--paper-scale", action="store_true")
    p.add_argument("--base-len", type=int, default=None)
    p.add_argument("--min-steps", type=int, default=None,
                   help="floor on total ground-truth steps per problem")
    p.add_argument("--walkers", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_ground_truth)

    p = sub.add_parser("sample", help="run one sampler ensemble")
    p.add_argument("--problem", required=True)
    p.add_argument("--sampler", required=True)
    p.add_argument("--step", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("bin", "csv"), default="bin")
    _add_run_flags(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("bench", help="grid-search samplers over a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--samplers", required=True, help="comma separated, e.g. hr,smlhr_delta")
    p.add_argument("--gt", required=True, help="ground-truth directory")
    p.add_argument("--out", default="results.csv")
    p.add_argument("--steps", default=None, help="comma separated step grid")
    _add_run_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", help="aggregate results into tables")
    p.add_argument("--results", required=True)
    p.add_argument("--out", default="tables")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("diagnose", help="diagnostics for a sample file")
    p.add_argument("--samples", required=True)
    p.add_argument("--gt", default=None)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        cfg = load_config(known.config)
        parser.set_defaults(**_norm(cfg))
        for name, sp in parser._subparsers._group_actions[0].choices.items():
            sp.set_defaults(**_norm(cfg))
            if isinstance(cfg.get(name), dict):
                sp.set_defaults(**_norm(cfg[name]))
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(Client(args.server), args)


if __name__ == "__main__":
    sys.exit(main())
