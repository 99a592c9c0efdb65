"""Command-line client.

Every subcommand marshals a request through the service layer; by default
the service runs in-process, with ``--server URL`` the same requests go to
a remote instance over HTTP.

Exit codes: 0 success, 1 negative result (unprovable, failed assertion,
diagnostics), 2 proof-search budget exceeded, 64 malformed input.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path as FsPath

from .service import handlers
from .service.handlers import PlayStore
from .service.models import (
    CheckRequest, FilePayload, PlayMoveRequest, PlayRequest, ProveRequest,
    RunRequest,
)

EX_OK, EX_NEGATIVE, EX_TIMEOUT, EX_USAGE = 0, 1, 2, 64


class LocalClient:
    def __init__(self):
        self.store = PlayStore()

    def prove(self, req):
        return handlers.handle_prove(req)

    def check(self, req):
        return handlers.handle_check(req)

    def run(self, req):
        return handlers.handle_run(req)

    def play_create(self, req):
        return self.store.create(req)

    def play_move(self, sid, req):
        return self.store.move(sid, req)

    def play_view(self, sid):
        return self.store.view_of(sid, [])

    def play_quit(self, sid):
        return self.store.quit(sid)


class HttpClient:
    def __init__(self, base: str):
        import httpx

        from .service import models
        self.models = models
        self.http = httpx.Client(base_url=base, timeout=60.0)

    def _post(self, path, payload, model):
        r = self.http.post(path, json=payload.model_dump())
        r.raise_for_status()
        return model.model_validate(r.json())

    def prove(self, req):
        return self._post("/prove", req, self.models.ProveResponse)

    def check(self, req):
        return self._post("/check", req, self.models.CheckResponse)

    def run(self, req):
        return self._post("/scenarios/run", req, self.models.RunResponse)

    def play_create(self, req):
        return self._post("/play", req, self.models.PlayCreateResponse)

    def play_move(self, sid, req):
        return self._post(f"/play/{sid}/moves", req, self.models.PlayMoveResponse)

    def play_view(self, sid):
        r = self.http.get(f"/play/{sid}")
        r.raise_for_status()
        return self.models.PlayMoveResponse.model_validate(r.json()).play

    def play_quit(self, sid):
        r = self.http.post(f"/play/{sid}/quit")
        if r.status_code == 404:
            return None
        r.raise_for_status()
        return self.models.PlayQuitResponse.model_validate(r.json())


def make_client(args) -> LocalClient | HttpClient:
    if args.server:
        return HttpClient(args.server)
    return LocalClient()


def _parse_valuation(text: str | None) -> dict[str, bool]:
    out: dict[str, bool] = {}
    if not text:
        return out
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        name, _, val = part.partition("=")
        if val not in ("0", "1", "true", "false"):
            raise ValueError(f"bad valuation entry {part!r}")
        out[name.strip()] = val in ("1", "true")
    return out


def _gather_files(path: FsPath) -> list[FilePayload]:
    if path.is_dir():
        names = sorted(path.glob("*.agent")) + sorted(path.glob("*.cfg"))
    else:
        names = [path]
    return [FilePayload(name=p.name, text=p.read_text(encoding="utf-8"))
            for p in names]


def cmd_prove(args, out) -> int:
    client = make_client(args)
    res = client.prove(ProveRequest(formula=args.formula, budget=args.budget,
                                    verify=args.verify))
    if res.status == "parse-error":
        print(f"error: {res.detail}", file=sys.stderr)
        return EX_USAGE
    if res.status == "unprovable":
        print("UNPROVABLE", file=out)
        return EX_NEGATIVE
    if res.status == "timeout":
        print("TIMEOUT", file=out)
        return EX_TIMEOUT
    rules = " ".join(f"{k}={v}" for k, v in sorted(res.rules.items()))
    print(f"PROVABLE nodes={res.nodes} {rules}", file=out)
    if res.verified is not None:
        print(f"verified={str(res.verified).lower()}", file=out)
    print(res.proof, end="", file=out)
    return EX_OK


def cmd_check(args, out) -> int:
    path = FsPath(args.path)
    if not path.exists():
        print(f"error: {path}: no such file or directory", file=sys.stderr)
        return EX_USAGE
    client = make_client(args)
    res = client.check(CheckRequest(files=_gather_files(path)))
    for d in res.diagnostics:
        print(f"{d.file}: {d.message}", file=out)
    if res.ok:
        print(f"ok: {len(res.agents)} agent(s): {', '.join(res.agents)}", file=out)
        return EX_OK
    return EX_NEGATIVE


def cmd_run(args, out) -> int:
    path = FsPath(args.scenario)
    if not path.is_dir():
        print(f"error: {path}: not a scenario directory", file=sys.stderr)
        return EX_USAGE
    assertions = None
    if args.assert_file:
        assertions = FsPath(args.assert_file).read_text(
            encoding="utf-8").splitlines()
    client = make_client(args)
    res = client.run(RunRequest(files=_gather_files(path), assertions=assertions,
                                seed=args.seed, ticks=args.ticks))
    if res.detail:
        print(f"error: {res.detail}", file=sys.stderr)
        return EX_USAGE
    text = "\n".join(res.trace) + "\n"
    if args.trace:
        FsPath(args.trace).write_text(text, encoding="utf-8")
    else:
        out.write(text)
    if res.failed_assertion is not None:
        print(f"assertion failed: {res.failed_assertion}", file=sys.stderr)
        return EX_NEGATIVE
    return EX_OK


PLAY_HELP = """commands:
  choose <path> <i>   pick component i of the choice node at <path>
  switch <path>       leading switch at the chain at <path>
  atom <path> <text>  move inside the general-atom game at <path>
  view                reprint the live formula
  quit                end the session and print the winner
paths are dot-separated child indexes, '-' for the root"""


def cmd_play(args, out, input_lines=None) -> int:
    client = make_client(args)
    try:
        valuation = _parse_valuation(args.valuation)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EX_USAGE
    res = client.play_create(PlayRequest(formula=args.formula,
                                         valuation=valuation,
                                         budget=args.budget))
    if not res.ok:
        print(f"error: {res.detail}", file=sys.stderr)
        return EX_USAGE if "parse" in res.detail else EX_NEGATIVE
    sid = res.play.session_id
    print(PLAY_HELP, file=out)
    for m in res.play.machine_moves:
        print(f"machine: {m}", file=out)
    print(f"view: {res.play.view}", file=out)
    lines = input_lines if input_lines is not None else sys.stdin
    for raw in lines:
        line = raw.strip()
        if not line:
            continue
        if line == "quit":
            break
        if line == "view":
            pass
        elif line == "help":
            print(PLAY_HELP, file=out)
            continue
        else:
            mv = client.play_move(sid, PlayMoveRequest(command=line))
            if not mv.ok:
                print(f"rejected: {mv.detail}", file=out)
                continue
            for m in mv.play.machine_moves:
                print(f"machine: {m}", file=out)
        view = client.play_view(sid)
        print(f"view: {view.view}", file=out)
    fin = client.play_quit(sid)
    if fin is not None:
        label = "machine" if fin.winner == "⊤" else "environment"
        print(f"winner: {fin.winner} ({label})", file=out)
    return EX_OK


def cmd_serve(args, out) -> int:
    import uvicorn

    from .service import create_app
    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="info")
    return EX_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="agora",
        description="prove queries, check agent files, run scenarios, play strategies")
    ap.add_argument("--server", help="service URL; default runs in-process")
    ap.add_argument("--seed", type=int, default=None, help="scenario seed override")
    ap.add_argument("--budget", type=int, default=None, help="proof search step budget")
    ap.add_argument("--trace", help="write the scenario trace to this file")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prove", help="decide a formula and print its proof")
    p.add_argument("formula")
    p.add_argument("--verify", action="store_true",
                   help="recheck the proof with the independent verifier")
    p.set_defaults(fn=cmd_prove)

    p = sub.add_parser("check", help="parse agent files or a scenario directory")
    p.add_argument("path")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("run", help="run a scenario directory to quiescence")
    p.add_argument("scenario")
    p.add_argument("--assert", dest="assert_file",
                   help="file of ordered substring patterns the trace must match")
    p.add_argument("--ticks", type=int, default=None)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("play", help="interactive session against a proved formula")
    p.add_argument("formula")
    p.add_argument("--valuation", help="comma list, e.g. p=1,q=false")
    p.set_defaults(fn=cmd_play)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(fn=cmd_serve)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args, sys.stdout)


if __name__ == "__main__":
    sys.exit(main())
