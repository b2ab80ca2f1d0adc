"""Render figures from spec files or from a whole results directory.

  jumpfield-report render --spec FILE.json        one figure from a spec
  jumpfield-report render --all RESULTS_DIR       every figure the directory
                                                  supports, inferred from the
                                                  files present
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .figures import FigureSpec, ReportError, render


def spec_from_json(path):
    raw = json.loads(Path(path).read_text())
    return FigureSpec(kind=raw["kind"], inputs=tuple(raw["inputs"]),
                      output=raw["output"], xlabel=raw.get("xlabel", ""),
                      ylabel=raw.get("ylabel", ""),
                      title=raw.get("title", ""),
                      options=raw.get("options", {}))


def discover_specs(results_dir, out_dir=None):
    """Infer renderable figures from the files in a results directory."""
    results_dir = Path(results_dir)
    out_dir = Path(out_dir) if out_dir else results_dir / "figures"
    specs = []
    results = results_dir / "results.csv"
    if results.exists():
        header = results.read_text().split("\n", 1)[0]
        if header.startswith("eps,"):
            specs.append(FigureSpec("rate-plot", (str(results),),
                                    str(out_dir / "rate")))
        elif header.startswith("t,"):
            specs.append(FigureSpec("trajectory", (str(results),),
                                    str(out_dir / "trajectory")))
    profile = results_dir / "profile.csv"
    if profile.exists():
        specs.append(FigureSpec("profile-overlay", (str(profile),),
                                str(out_dir / "profile")))
    averages = results_dir / "ball_averages.csv"
    if averages.exists():
        specs.append(FigureSpec("envelope", (str(averages),),
                                str(out_dir / "envelope")))
    return specs


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="jumpfield-report")
    sub = parser.add_subparsers(dest="command")
    p_render = sub.add_parser("render", help="render figures")
    p_render.add_argument("--spec", help="figure spec JSON file")
    p_render.add_argument("--all", dest="all_dir",
                          help="render everything a results dir supports")
    p_render.add_argument("--out", default=None,
                          help="output directory for --all")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    if args.command != "render" or not (args.spec or args.all_dir):
        parser.print_usage()
        return 1
    try:
        if args.spec:
            summary = render(spec_from_json(args.spec))
            print(json.dumps({k: str(v) if isinstance(v, Path) else v
                              for k, v in summary.items()
                              if k != "files"}, sort_keys=True))
            return 0
        specs = discover_specs(args.all_dir, args.out)
        if not specs:
            print("error: nothing renderable found", file=sys.stderr)
            return 1
        for spec in specs:
            render(spec)
            print(f"rendered {spec.kind} -> {spec.output}")
        return 0
    except (ReportError, FileNotFoundError, KeyError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
