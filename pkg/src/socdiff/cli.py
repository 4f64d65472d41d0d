"""Command line for dataset statistics, evaluation, sweeps, and self-checks.

The CLI is a thin client over the HTTP service. By default it instantiates
the FastAPI app in-process and talks to it over an ASGI transport; --server
points the same commands at a running instance instead. Reports are written
locally from the response payload, so output bytes never depend on where
the computation ran or on the worker count.

Exit codes: 0 success, 1 runtime/data error, 2 usage error. Summaries go to
standard output, diagnostics to standard error, reports to --out.
"""

from __future__ import annotations

import argparse
import asyncio
import sys

import httpx
import numpy as np

from . import __version__
from .diffusion import KernelSpec, kernel_label
from .errors import SocdiffError
from .harness import (ColdstartComparison, EvaluationResult, ExperimentConfig,
                      SweepPoint, SweepResult)
from .metrics import MetricsReport
from .datasets import write_report


class UsageError(Exception):
    """Bad flag combination; reported before any computation starts."""


class ClientError(Exception):
    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status


class ServiceClient:
    """One-shot HTTP client; in-process ASGI unless a server URL is given."""

    def __init__(self, server=None):
        self._server = server.rstrip("/") if server else None
        if self._server is None:
            from .service import create_app
            self._app = create_app()

    def request(self, method: str, path: str, json_body=None, params=None) -> dict:
        if self._server is not None:
            with httpx.Client(base_url=self._server, timeout=3600.0) as client:
                resp = client.request(method, path, json=json_body, params=params)
            return self._unwrap(resp)

        async def _go():
            transport = httpx.ASGITransport(app=self._app)
            async with httpx.AsyncClient(transport=transport, timeout=3600.0,
                                         base_url="http://socdiff.internal") as client:
                return await client.request(method, path, json=json_body,
                                            params=params)

        return self._unwrap(asyncio.run(_go()))

    @staticmethod
    def _unwrap(resp: httpx.Response) -> dict:
        if resp.status_code >= 400:
            try:
                payload = resp.json()
            except ValueError:
                payload = {}
            message = payload.get("message") or payload.get("detail") or resp.text
            raise ClientError(str(message), status=resp.status_code)
        return resp.json()


# -- flag plumbing --

DEFAULTS = {
    "unknown_user_rule": "skip", "social_steps": 1, "friendless_rule": "retain",
    "probe_fraction": 0.1, "runs": 10, "seed": 0, "top_l": 20, "format": "json",
    "max_degree": 3, "instances": 50, "communities": 2,
    "users_per_community": 50, "items_per_community": 50,
    "intra_collect": 0.2, "inter_collect": 0.01,
    "intra_friend": 0.1, "inter_friend": 0.005,
    "host": "127.0.0.1", "port": 8000,
}

CONFIG_TYPES = {
    "items": str, "social": str, "out": str, "format": str, "method": str,
    "p": float, "lam": float, "social_steps": int, "friendless_rule": str,
    "probe_fraction": float, "runs": int, "seed": int, "top_l": int,
    "workers": int, "grid": str, "max_degree": int, "instances": int,
    "unknown_user_rule": str, "server": str, "items_out": str,
    "social_out": str, "communities": int, "users_per_community": int,
    "items_per_community": int, "intra_collect": float, "inter_collect": float,
    "intra_friend": float, "inter_friend": float, "host": str, "port": int,
    "oracle": bool,
}


def _read_config(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise UsageError(f"{path}:{no}: expected key=value, got {line!r}")
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _apply_config(ns) -> None:
    if getattr(ns, "config", None) is None:
        return
    alias = {"lambda": "lam", "l": "top_l"}
    for key, raw in _read_config(ns.config).items():
        dest = alias.get(key, key)
        if dest not in CONFIG_TYPES or not hasattr(ns, dest):
            raise UsageError(f"config key {key!r} is not valid for `{ns.command}`")
        current = getattr(ns, dest)
        # command-line flags win over the file
        if current is not None and not (dest == "oracle" and current is False):
            continue
        conv = CONFIG_TYPES[dest]
        try:
            value = raw.lower() in ("1", "true", "yes") if conv is bool else conv(raw)
        except ValueError:
            raise UsageError(f"config key {key!r}: cannot parse {raw!r}") from None
        setattr(ns, dest, value)


def _finalize(ns) -> None:
    for key, value in DEFAULTS.items():
        if hasattr(ns, key) and getattr(ns, key) is None:
            setattr(ns, key, value)


def parse_grid(text: str) -> list:
    """`start:stop:step` inclusive of both ends when step divides the span."""
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"grid must be start:stop:step, got {text!r}")
    try:
        start, stop, step = (float(x) for x in parts)
    except ValueError:
        raise UsageError(f"grid values must be numbers, got {text!r}") from None
    if step <= 0:
        raise UsageError("grid step must be positive")
    if stop < start:
        raise UsageError(f"inverted grid: start {start:g} > stop {stop:g}")
    count = int(round((stop - start) / step)) + 1
    values = [float(np.round(start + i * step, 10)) for i in range(count)]
    return [v for v in values if v <= stop + 1e-9]


def _kernel_from_flags(ns) -> KernelSpec:
    if ns.method is None:
        raise UsageError("--method is required")
    try:
        return KernelSpec(ns.method, lam=ns.lam, p=ns.p,
                          social_steps=ns.social_steps,
                          friendless_rule=ns.friendless_rule)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _experiment_check(ns, kernel, grid=None) -> None:
    try:
        ExperimentConfig(kernel=kernel, master_seed=ns.seed,
                         probe_fraction=ns.probe_fraction, runs=ns.runs,
                         l=ns.top_l, parameter_grid=grid, workers=ns.workers)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _require(ns, *names) -> None:
    for name in names:
        if getattr(ns, name) is None:
            raise UsageError(f"--{name.replace('_', '-')} is required")


# -- response -> result objects --

def _report_from(d: dict) -> MetricsReport:
    vals = {f: float(d[f]) for f in MetricsReport.FIELDS}
    return MetricsReport(l=int(d["l"]), users_evaluated=d["users_evaluated"], **vals)


def _evaluation_from(body: dict) -> EvaluationResult:
    return EvaluationResult(mean=_report_from(body["mean"]),
                            per_run=[_report_from(r) for r in body["runs"]],
                            run_seeds=[int(s) for s in body["run_seeds"]])


def _sweep_from(body: dict) -> SweepResult:
    points = [SweepPoint(parameter=float(pt["parameter"]),
                         mean=_report_from(pt["mean"]),
                         per_run=[_report_from(r) for r in pt["runs"]])
              for pt in body["points"]]
    return SweepResult(points=points,
                       optimal_parameter=float(body["optimal_parameter"]),
                       run_seeds=[int(s) for s in body["run_seeds"]])


def _coldstart_from(body: dict) -> ColdstartComparison:
    return ColdstartComparison(
        smd=_report_from(body["smd"]), grm=_report_from(body["grm"]),
        improvements=dict(body["improvements"]),
        selected_users=np.asarray(body["selected_users"], dtype=np.int64),
        excluded_no_friends=int(body["excluded_no_friends"]),
        excluded_no_links=int(body["excluded_no_links"]),
        lost_mass=float(body["lost_mass"]))


# -- shared steps --

def _read_file(path) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _upload(client: ServiceClient, ns) -> dict:
    _require(ns, "items")
    body = {"items_text": _read_file(ns.items),
            "unknown_user_rule": ns.unknown_user_rule,
            "items_name": str(ns.items)}
    if ns.social is not None:
        body["social_text"] = _read_file(ns.social)
        body["social_name"] = str(ns.social)
    info = client.request("POST", "/datasets", json_body=body)
    diag = info.get("diagnostics", {})
    notes = {"duplicate_bipartite_pairs": "duplicate user-item pairs collapsed",
             "social_pairs_skipped": "social pairs naming unknown users skipped",
             "users_added_from_social": "users added from the social file",
             "social_self_loops_dropped": "social self-loops dropped",
             "duplicate_social_pairs": "duplicate social pairs collapsed"}
    for key, label in notes.items():
        if diag.get(key):
            print(f"note: {diag[key]} {label}", file=sys.stderr)
    return info


def _echo_common(ns, kernel: KernelSpec) -> dict:
    return {"method": ns.method, "kernel": kernel_label(kernel),
            "items": ns.items, "social": ns.social,
            "probe_fraction": ns.probe_fraction, "runs": ns.runs,
            "seed": ns.seed, "top_l": ns.top_l}


def _kernel_body(ns) -> dict:
    body = {"method": ns.method, "social_steps": ns.social_steps,
            "friendless_rule": ns.friendless_rule}
    if ns.p is not None:
        body["p"] = ns.p
    if ns.lam is not None:
        body["lam"] = ns.lam
    return body


def _summary_line(rep: MetricsReport) -> str:
    parts = [f"{f}={getattr(rep, f):.6g}" for f in MetricsReport.FIELDS]
    return (" ".join(parts)
            + f" users_evaluated={rep.users_evaluated:g} l={rep.l}")


# -- commands --

def _cmd_stats(ns) -> int:
    client = ServiceClient(ns.server)
    info = _upload(client, ns)
    print(f"n_users\t{info['n_users']}")
    print(f"n_items\t{info['n_items']}")
    print(f"n_links\t{info['n_links']}")
    print(f"n_social_links\t{info['n_social_links']}")
    print(f"mean_user_degree\t{info['mean_user_degree']:.6g}")
    print(f"mean_social_degree\t{info['mean_social_degree']:.6g}")
    if ns.out is not None:
        rows = []
        for kind in ("collection", "social"):
            resp = client.request("GET", f"/datasets/{info['dataset_id']}/degrees",
                                  params={"kind": kind})
            hist = resp["histogram"]
            rows += [(kind, d, hist[d]) for d in sorted(hist, key=int)]
        with open(ns.out, "w", encoding="utf-8", newline="") as fh:
            fh.write("kind,degree,count\n")
            for kind, degree, count in rows:
                fh.write(f"{kind},{degree},{count}\n")
        print(f"degree histogram written to {ns.out}", file=sys.stderr)
    return 0


def _cmd_evaluate(ns) -> int:
    kernel = _kernel_from_flags(ns)
    _experiment_check(ns, kernel)
    _require(ns, "out")
    client = ServiceClient(ns.server)
    info = _upload(client, ns)
    body = _kernel_body(ns)
    body.update(probe_fraction=ns.probe_fraction, runs=ns.runs,
                master_seed=ns.seed, top_l=ns.top_l, workers=ns.workers)
    resp = client.request("POST", f"/datasets/{info['dataset_id']}/evaluate",
                          json_body=body)
    result = _evaluation_from(resp)
    write_report(result, ns.out, ns.format, config=_echo_common(ns, kernel))
    print(_summary_line(result.mean))
    return 0


def _cmd_sweep(ns) -> int:
    _require(ns, "grid")
    grid = parse_grid(ns.grid)
    # the grid supplies the swept parameter, so --p/--lambda may be omitted
    if ns.method == "smd" and ns.p is None:
        ns.p = grid[0]
    elif ns.method == "hybrid" and ns.lam is None:
        ns.lam = grid[0]
    kernel = _kernel_from_flags(ns)
    _experiment_check(ns, kernel, grid)
    _require(ns, "out")
    client = ServiceClient(ns.server)
    info = _upload(client, ns)
    body = _kernel_body(ns)
    body.update(probe_fraction=ns.probe_fraction, runs=ns.runs,
                master_seed=ns.seed, top_l=ns.top_l, workers=ns.workers,
                grid=grid)
    resp = client.request("POST", f"/datasets/{info['dataset_id']}/sweep",
                          json_body=body)
    result = _sweep_from(resp)
    # the swept parameter has no single value, so echo the family + grid
    echo = {"method": ns.method, "grid": ns.grid,
            "social_steps": ns.social_steps,
            "friendless_rule": ns.friendless_rule,
            "items": ns.items, "social": ns.social,
            "probe_fraction": ns.probe_fraction, "runs": ns.runs,
            "seed": ns.seed, "top_l": ns.top_l}
    write_report(result, ns.out, ns.format, config=echo)
    best = next(pt for pt in result.points
                if pt.parameter == result.optimal_parameter)
    print(f"optimal_parameter={result.optimal_parameter:g} rs={best.mean.rs:.6g}")
    return 0


def _cmd_coldstart(ns) -> int:
    if ns.method is None:
        ns.method = "smd"
    if ns.method not in ("smd", "grm"):
        raise UsageError("cold-start supports --method smd (or grm for the "
                         "debug self-comparison)")
    kernel = _kernel_from_flags(ns)
    if ns.max_degree < 0:
        raise UsageError("--max-degree must be >= 0")
    _require(ns, "out")
    client = ServiceClient(ns.server)
    info = _upload(client, ns)
    body = {"method": ns.method, "social_steps": ns.social_steps,
            "friendless_rule": ns.friendless_rule, "max_degree": ns.max_degree,
            "top_l": ns.top_l, "workers": ns.workers}
    if ns.p is not None:
        body["p"] = ns.p
    resp = client.request("POST", f"/datasets/{info['dataset_id']}/coldstart",
                          json_body=body)
    comp = _coldstart_from(resp)
    echo = {"method": ns.method, "kernel": kernel_label(kernel),
            "items": ns.items, "social": ns.social,
            "max_degree": ns.max_degree, "top_l": ns.top_l}
    write_report(comp, ns.out, ns.format, config=echo)
    print(f"selected_users={len(comp.selected_users)} "
          f"excluded_no_friends={comp.excluded_no_friends} "
          f"excluded_no_links={comp.excluded_no_links}")
    for metric in MetricsReport.FIELDS:
        imp = comp.improvements[metric]
        imp_text = "undefined (baseline 0)" if imp is None else f"{imp:+.6g}"
        print(f"{metric} smd={getattr(comp.smd, metric):.6g} "
              f"grm={getattr(comp.grm, metric):.6g} improvement={imp_text}")
    return 0


def _cmd_verify(ns) -> int:
    client = ServiceClient(ns.server)
    resp = client.request("POST", "/verify",
                          json_body={"seed": ns.seed, "instances": ns.instances,
                                     "friendless_rule": ns.friendless_rule})
    for r in resp["results"]:
        print(f"{'PASS' if r['passed'] else 'FAIL'} {r['name']}: {r['detail']}")
    n_pass = sum(1 for r in resp["results"] if r["passed"])
    print(f"{n_pass}/{len(resp['results'])} properties passed")
    return 0 if resp["passed"] else 1


def _cmd_synth(ns) -> int:
    _require(ns, "items_out", "social_out")
    client = ServiceClient(ns.server)
    spec = {k: getattr(ns, k) for k in
            ("communities", "users_per_community", "items_per_community",
             "intra_collect", "inter_collect", "intra_friend", "inter_friend",
             "seed")}
    info = client.request("POST", "/datasets/synth", json_body=spec)
    export = client.request("GET", f"/datasets/{info['dataset_id']}/export")
    with open(ns.items_out, "w", encoding="utf-8", newline="") as fh:
        fh.write(export["items_text"])
    with open(ns.social_out, "w", encoding="utf-8", newline="") as fh:
        fh.write(export["social_text"])
    print(f"dataset_id\t{info['dataset_id']}")
    print(f"n_users\t{info['n_users']}")
    print(f"n_items\t{info['n_items']}")
    print(f"n_links\t{info['n_links']}")
    print(f"n_social_links\t{info['n_social_links']}")
    return 0


def _cmd_serve(ns) -> int:
    import uvicorn

    from .service import create_app
    uvicorn.run(create_app(), host=ns.host, port=ns.port)
    return 0


# -- parser --

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--items", help="user-item TSV edge list")
    p.add_argument("--social", help="user-user TSV edge list")
    p.add_argument("--unknown-user-rule", dest="unknown_user_rule",
                   choices=("skip", "add"),
                   help="what to do with social pairs naming users absent "
                        "from the items file (default: skip)")
    p.add_argument("--server", help="base URL of a running service "
                                    "(default: run in-process)")
    p.add_argument("--config", help="flat key=value config file; "
                                    "command-line flags win")


def _add_eval_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", choices=("md", "hc", "hybrid", "smd", "grm"))
    p.add_argument("--p", type=float, help="retention fraction (smd only)")
    p.add_argument("--lambda", dest="lam", type=float,
                   help="mixing exponent (hybrid only)")
    p.add_argument("--social-steps", dest="social_steps", type=int,
                   help="social rounds before the item step (smd, default 1)")
    p.add_argument("--friendless-rule", dest="friendless_rule",
                   choices=("retain", "drop"),
                   help="what friendless users do with the shared fraction "
                        "(default: retain)")
    p.add_argument("--probe-fraction", dest="probe_fraction", type=float,
                   help="held-out link fraction (default 0.1)")
    p.add_argument("--runs", type=int, help="independent splits (default 10)")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--top-l", dest="top_l", type=int,
                   help="recommendation list length (default 20)")
    p.add_argument("--workers", type=int,
                   help="worker threads (default: machine parallelism, "
                        "SOCDIFF_WORKERS as fallback)")
    p.add_argument("--out", help="report file path")
    p.add_argument("--format", choices=("csv", "json"),
                   help="report format (default json)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="socdiff",
        description="Diffusion recommendation experiments on bipartite "
                    "networks with a social layer.")
    parser.add_argument("--version", action="version",
                        version=f"socdiff {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    stats = sub.add_parser("stats", help="dataset statistics and degree histogram")
    _add_common(stats)
    stats.add_argument("--out", help="degree histogram CSV path (optional)")

    evaluate = sub.add_parser("evaluate",
                              help="repeated-holdout evaluation of one kernel")
    _add_common(evaluate)
    _add_eval_flags(evaluate)

    sweep = sub.add_parser("sweep", help="grid search over p (smd) or lambda (hybrid)")
    _add_common(sweep)
    _add_eval_flags(sweep)
    sweep.add_argument("--grid", help='parameter grid "start:stop:step"')

    coldstart = sub.add_parser("coldstart",
                               help="social kernel vs popularity baseline on "
                                    "low-degree users")
    _add_common(coldstart)
    _add_eval_flags(coldstart)
    coldstart.add_argument("--max-degree", dest="max_degree", type=int,
                           help="largest training degree still counted as a "
                                "cold user (default 3)")

    verify = sub.add_parser("verify", help="run the randomized self-check suite")
    verify.add_argument("--oracle", action="store_true",
                        help="include the dense transfer-matrix oracle checks "
                             "(always on; flag kept for script compatibility)")
    verify.add_argument("--seed", type=int, help="suite seed (default 0)")
    verify.add_argument("--instances", type=int,
                        help="random instances per property (default 50)")
    verify.add_argument("--friendless-rule", dest="friendless_rule",
                        choices=("retain", "drop"),
                        help="rule under test; drop demonstrates the "
                             "conservation failure")
    verify.add_argument("--server", help="base URL of a running service")
    verify.add_argument("--config", help="flat key=value config file")

    synth = sub.add_parser("synth",
                           help="generate a planted-partition dataset as TSV files")
    for flag in ("--communities", "--users-per-community", "--items-per-community"):
        synth.add_argument(flag, dest=flag[2:].replace("-", "_"), type=int)
    for flag in ("--intra-collect", "--inter-collect", "--intra-friend",
                 "--inter-friend"):
        synth.add_argument(flag, dest=flag[2:].replace("-", "_"), type=float)
    synth.add_argument("--seed", type=int, help="generator seed (default 0)")
    synth.add_argument("--items-out", dest="items_out",
                       help="where to write the user-item TSV")
    synth.add_argument("--social-out", dest="social_out",
                       help="where to write the user-user TSV")
    synth.add_argument("--server", help="base URL of a running service")
    synth.add_argument("--config", help="flat key=value config file")

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host")
    serve.add_argument("--port", type=int)

    return parser


_HANDLERS = {
    "stats": _cmd_stats,
    "evaluate": _cmd_evaluate,
    "sweep": _cmd_sweep,
    "coldstart": _cmd_coldstart,
    "verify": _cmd_verify,
    "synth": _cmd_synth,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        _apply_config(ns)
        _finalize(ns)
        return _HANDLERS[ns.command](ns)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except ClientError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if exc.status == 422 else 1
    except (SocdiffError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
