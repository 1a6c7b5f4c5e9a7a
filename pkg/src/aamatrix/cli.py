"""Command-line interface: validate and classify profiles, inspect conflicts,
render reports, run scenarios, and serve the HTTP control plane."""

from __future__ import annotations

import argparse
import json
import sys
from typing import List, Optional

from .dependencies import compare, detect_conflicts, nearest_group
from .engine import event_line, run
from .ontology import OutcomeStatus
from .profiles import (
    ProfileError,
    SystemProfile,
    builtin_profile,
    builtin_profiles,
    llm_builtin_profiles,
    parse_profile,
    validate,
)
from .reporting import (
    Dimension,
    level_distribution,
    render_bars,
    render_radar,
    render_table,
)
from .scenario import Intervention, InvalidScenario, command_from_dict, load_scenario


def _load_profile(ref: str) -> SystemProfile:
    """A profile argument is either 'builtin:<Name>' or a file path."""
    if ref.startswith("builtin:"):
        return builtin_profile(ref.split(":", 1)[1])
    with open(ref, "r", encoding="utf-8") as fh:
        return parse_profile(fh.read())


def _write_out(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_validate(args) -> int:
    try:
        profile = _load_profile(args.profile)
    except ProfileError as exc:
        print(json.dumps({"valid": False, "issues": [["document", str(exc)]]}, indent=2))
        return 1
    report = validate(profile)
    print(json.dumps({"valid": report.valid, "issues": report.issues}, indent=2))
    return 0 if report.valid else 1


def cmd_classify(args) -> int:
    profile = _load_profile(args.profile)
    exemplars = [p for p in builtin_profiles() if p.name != profile.name]
    result = nearest_group(profile, exemplars)
    print(
        json.dumps(
            {
                "profile": profile.name,
                "category": result.category.value,
                "nearest": result.nearest_name,
                "distance": result.distance,
                "tied": result.tied,
            },
            indent=2,
        )
    )
    return 0


def cmd_compare(args) -> int:
    a, b = _load_profile(args.a), _load_profile(args.b)
    distance = compare(a, b)
    print(
        json.dumps(
            {
                "a": a.name,
                "b": b.name,
                "total": distance.total,
                "per_aspect": {
                    aspect.key: list(diff) for aspect, diff in distance.per_aspect.items()
                },
            },
            indent=2,
        )
    )
    return 0


def cmd_conflicts(args) -> int:
    profile = _load_profile(args.profile)
    conflicts = detect_conflicts(profile)
    print(json.dumps([c.to_dict() for c in conflicts], indent=2))
    return 0


def cmd_report(args) -> int:
    if args.kind == "radar":
        if not args.target:
            print("report radar needs a profile name or path", file=sys.stderr)
            return 2
        profile = _load_profile(args.target)
        _write_out(render_radar(profile), args.out)
    elif args.kind == "bars":
        dimension = Dimension((args.target or "autonomy").capitalize())
        profiles = builtin_profiles() if args.all_builtins else llm_builtin_profiles()
        _write_out(render_bars(level_distribution(profiles, dimension)), args.out)
    else:
        _write_out(render_table(builtin_profiles()), args.out)
    return 0


def cmd_run(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except InvalidScenario as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return 2
    if args.interventions:
        with open(args.interventions, "r", encoding="utf-8") as fh:
            entries = json.load(fh)
        scenario.interventions.extend(
            Intervention(
                command=command_from_dict(entry["command"]),
                at_action=entry.get("at_action"),
                on_approval=entry.get("on_approval"),
            )
            for entry in entries
        )
    sink = None
    if not args.quiet:
        sink = lambda event: print(event_line(event))  # noqa: E731
    result = run(scenario, event_sink=sink, artefact_dir=args.artefact_dir)
    if args.events:
        with open(args.events, "wb") as fh:
            fh.write(result.stream_bytes())
    print(
        json.dumps(
            {
                "status": result.outcome.status.value,
                "detail": result.outcome.detail,
                "actions": len(result.activity.action_log),
                "response": result.outcome.response,
            },
            indent=2,
        ),
        file=sys.stderr,
    )
    return 0 if result.outcome.status is OutcomeStatus.COMPLETED else 1


def cmd_serve(args) -> int:
    from .service import serve

    serve(host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aamatrix",
        description="Autonomy-alignment profiling and simulation workbench",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a profile document")
    p.add_argument("profile", help="profile path or builtin:<Name>")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("classify", help="assign a profile to the nearest builtin group")
    p.add_argument("profile")
    p.set_defaults(fn=cmd_classify)

    p = sub.add_parser("compare", help="distance between two profiles")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("conflicts", help="intertwined-dependency conflicts of a profile")
    p.add_argument("profile")
    p.set_defaults(fn=cmd_conflicts)

    p = sub.add_parser("report", help="render radar/bars/table reports")
    p.add_argument("kind", choices=["radar", "bars", "table"])
    p.add_argument("target", nargs="?", help="radar: profile; bars: autonomy|alignment")
    p.add_argument("-o", "--out", help="output path (default stdout)")
    p.add_argument("--all-builtins", action="store_true", help="include the contrast row")
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("run", help="execute a scenario file")
    p.add_argument("scenario")
    p.add_argument("--interventions", help="JSON file with scheduled commands")
    p.add_argument("--events", help="write the event stream to this file")
    p.add_argument("--artefact-dir", default=".", help="directory for file artefacts")
    p.add_argument("-q", "--quiet", action="store_true", help="do not echo events")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("serve", help="start the HTTP control service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
