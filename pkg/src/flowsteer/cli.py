"""Command-line entry point.

    flowsteer serve    --scene dam --port 8642 [--cadence N] [--mode M] [--out DIR]
    flowsteer replay   --scene PATH --script PATH [--steps N] [--out DIR]
    flowsteer bench    [--dims X,Y,Z] [--steps N]
    flowsteer validate [case ...]

Scenes resolve as a file path first, then as a packaged scene name.
`FLOWSTEER_LOG_LEVEL` sets logging (DEBUG/INFO/WARNING/ERROR).  Exit codes:
0 success, 1 usage error, 2 runtime fault (including failed validation).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Optional

from . import bench, replay, validate
from .scenario import InvalidScene, SceneSpec, find_scene, load_scene_file
from .server import ServerStartupError, SteeringServer


class _Parser(argparse.ArgumentParser):
    """argparse with the documented usage exit code (1, not 2)."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, "%s: error: %s\n" % (self.prog, message))


def _dims(text: str) -> tuple[int, int, int]:
    try:
        parts = tuple(int(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("dims must be X,Y,Z integers")
    if len(parts) != 3 or min(parts) < 1:
        raise argparse.ArgumentTypeError("dims must be three positive sizes")
    return parts


def _port(text: str) -> int:
    value = int(text)
    if not 0 <= value <= 65535:
        raise argparse.ArgumentTypeError("port must be in [0, 65535]")
    return value


def _resolve_scene(name_or_path: str,
                   scene_dir: Optional[Path] = None) -> SceneSpec:
    p = Path(name_or_path)
    if p.is_file():
        return load_scene_file(p)
    return find_scene(name_or_path, scene_dir=scene_dir)


def build_parser() -> _Parser:
    parser = _Parser(prog="flowsteer",
                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sv = sub.add_parser("serve", help="run the interactive steering server")
    sv.add_argument("--scene", default="dam",
                    help="scene file path or packaged scene name")
    sv.add_argument("--port", type=_port, default=8642)
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--cadence", type=int, default=4,
                    help="snapshot every N timesteps")
    sv.add_argument("--mode", choices=("interactive", "restart"),
                    default="interactive")
    sv.add_argument("--out", type=Path, default=None,
                    help="directory for the session event log")
    sv.add_argument("--scene-dir", type=Path, default=None,
                    help="extra directory searched by LOAD_SCENE")

    rp = sub.add_parser("replay", help="run a scripted session headlessly")
    rp.add_argument("--scene", required=True)
    rp.add_argument("--script", required=True, type=Path)
    rp.add_argument("--steps", type=int, default=20000,
                    help="simulation step budget")
    rp.add_argument("--cadence", type=int, default=4)
    rp.add_argument("--mode", choices=("interactive", "restart"),
                    default="interactive")
    rp.add_argument("--out", type=Path, default=None,
                    help="directory for events.log and snapshot dumps")
    rp.add_argument("--scene-dir", type=Path, default=None)

    bn = sub.add_parser("bench", help="measure raw lattice throughput")
    bn.add_argument("--dims", type=_dims, default=(30, 30, 96))
    bn.add_argument("--steps", type=int, default=1000)
    bn.add_argument("--warmup", type=int, default=100)
    bn.add_argument("--tau", type=float, default=0.55)

    vl = sub.add_parser("validate", help="run physics validation cases")
    vl.add_argument("cases", nargs="*",
                    help="subset to run (default: all): %s"
                         % ", ".join(sorted(validate.CASES)))
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    level = os.environ.get("FLOWSTEER_LOG_LEVEL", "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(asctime)s %(name)s %(message)s")
    args = build_parser().parse_args(argv)

    try:
        if args.command == "serve":
            spec = _resolve_scene(args.scene, args.scene_dir)
            server = SteeringServer(spec, port=args.port, host=args.host,
                                    cadence=args.cadence, mode=args.mode,
                                    out_dir=args.out, scene_dir=args.scene_dir)
            # the bound port, not the requested one: --port 0 lets the OS
            # pick and callers (scripts, tests) read it back from this line
            print("serving %r (%dx%dx%d) on %s:%d"
                  % ((spec.name,) + tuple(spec.dims)
                     + (server.host, server.port)), flush=True)
            try:
                server.serve_forever()
            except KeyboardInterrupt:
                pass
            finally:
                server.close()
            return 0

        if args.command == "replay":
            spec = _resolve_scene(args.scene, args.scene_dir)
            actions = replay.load_script(args.script, spec)
            result = replay.run_replay(
                spec, actions, total_steps=args.steps,
                cadence=args.cadence, mode=args.mode, out_dir=args.out,
                scene_dir=args.scene_dir)
            print(result.summary())
            if args.out is not None:
                print("event log: %s" % (args.out / "events.log"))
            return 0

        if args.command == "bench":
            report = bench.run_bench(args.dims, steps=args.steps,
                                     warmup=args.warmup, tau=args.tau)
            print(report.summary())
            return 0

        if args.command == "validate":
            results = validate.run_validation(args.cases or None)
            for r in results:
                print(r.line())
            failed = [r for r in results if not r.passed]
            if failed:
                print("%d of %d cases failed" % (len(failed), len(results)))
                return 2
            print("all %d cases passed" % len(results))
            return 0
    except (InvalidScene, ServerStartupError, replay.ScriptError,
            FileNotFoundError, KeyError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
