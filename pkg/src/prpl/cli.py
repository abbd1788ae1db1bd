"""Command-line front end.

The CLI is a thin client of the HTTP service: by default it mounts the
FastAPI app in-process (no server needed), or targets a running server when
``--server``/``PRPL_SERVER`` is set. Machine output (JSON) goes to stdout,
human summaries to stderr. Exit codes: 0 success, 1 runtime/IO failure,
2 config/validation error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .util import canonical_dumps

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2


class CliFailure(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _client(server: str | None):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=None)
    import warnings

    with warnings.catch_warnings():
        # starlette warns about its httpx-based TestClient; harmless here
        warnings.simplefilter("ignore")
        from starlette.testclient import TestClient

        from .service.app import app

        return TestClient(app)


def _post(client, path: str, payload: dict) -> dict:
    try:
        resp = client.post(path, json=payload)
    except Exception as exc:
        raise CliFailure(f"service unreachable: {exc}", EXIT_RUNTIME) from exc
    try:
        body = resp.json()
    except Exception as exc:
        raise CliFailure(f"unparseable service response: {exc}", EXIT_RUNTIME) from exc
    if resp.status_code >= 400:
        err = body.get("error", {}) if isinstance(body, dict) else {}
        kind = err.get("kind", "runtime")
        message = err.get("message", str(body))
        code = EXIT_VALIDATION if kind == "validation" else EXIT_RUNTIME
        raise CliFailure(message, code)
    return body


def _read_json_file(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliFailure(f"cannot read {path}: {exc}", EXIT_RUNTIME) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliFailure(f"{path} is not valid JSON: {exc}", EXIT_VALIDATION) from exc


def _emit(body: dict) -> None:
    sys.stdout.write(canonical_dumps(body))


# -- subcommands -----------------------------------------------------------


def cmd_select(args, client) -> int:
    body = _post(
        client,
        "/select",
        {
            "manifest_path": args.manifest,
            "source_domain": args.source,
            "target_domain": args.target,
            "metric": args.metric,
        },
    )
    _emit(body)
    print(f"chosen extractor: {body['chosen']}", file=sys.stderr)
    return EXIT_OK


def cmd_train(args, client) -> int:
    doc = _read_json_file(args.config)
    body = _post(client, "/train", {"config": doc})
    _emit(body)
    out = doc.get("output", {}).get("report") if isinstance(doc, dict) else None
    if out:
        print(f"report written to {out}", file=sys.stderr)
    return EXIT_OK


def cmd_tune(args, client) -> int:
    doc = _read_json_file(args.config)
    body = _post(client, "/tune", {"config": doc})
    _emit(body)
    chosen = body.get("chosen", {})
    print(
        f"chosen T={chosen.get('T')} p_schedule={chosen.get('p_schedule')}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_synth(args, client) -> int:
    body = _post(
        client,
        "/synth",
        {
            "num_classes": args.classes,
            "d": args.dim,
            "n_per_class_source": args.n_source,
            "n_per_class_target": args.n_target,
            "class_mean_separation": args.separation,
            "domain_shift": args.shift,
            "noise_sigma": args.sigma,
            "seed": args.seed,
            "out_prefix": args.out_prefix,
        },
    )
    _emit(body)
    print(f"wrote {body['source']} and {body['target']}", file=sys.stderr)
    return EXIT_OK


def cmd_eval(args, client) -> int:
    body = _post(
        client, "/eval", {"head_path": args.head, "features_path": args.features}
    )
    _emit(body)
    return EXIT_OK


def cmd_serve(args, _client) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prpl", description="feature-space domain adaptation toolkit"
    )
    parser.add_argument(
        "--server",
        default=os.environ.get("PRPL_SERVER") or None,
        help="base URL of a running prpl service (default: run in-process)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("select", help="pick the best extractor from a manifest")
    p.add_argument("manifest", help="manifest JSON path")
    p.add_argument("--source", required=True, help="source domain id")
    p.add_argument("--target", required=True, help="target domain id")
    p.add_argument(
        "--metric", default="mean_l2", choices=["mean_l2", "mmd", "mean_cosine"]
    )
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("train", help="run recurrent pseudo-label training")
    p.add_argument("config", help="run config JSON path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("tune", help="grid-tune T and the threshold schedule")
    p.add_argument("config", help="tune config JSON path (with a grid section)")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("synth", help="generate synthetic source/target feature files")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--n-source", type=int, required=True, help="samples per class")
    p.add_argument("--n-target", type=int, required=True, help="samples per class")
    p.add_argument("--separation", type=float, default=3.0)
    p.add_argument("--shift", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="accuracy of a saved head on labeled features")
    p.add_argument("--head", required=True)
    p.add_argument("--features", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8151)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    client = None
    try:
        if args.func is not cmd_serve:
            client = _client(args.server)
        return args.func(args, client)
    except CliFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    finally:
        if client is not None:
            client.close()


if __name__ == "__main__":
    sys.exit(main())
