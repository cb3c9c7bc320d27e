"""Command-line front end.

Subcommands cover the bundled transformations (state-machine compilation,
substitution, inlining, lambda lifting) and two diagnostics (name-graph
export, alpha-equivalence check). Input language is chosen by file
extension: .stm, .spl, .lam.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Callable

from . import fix, lam, simpl, statemachine
from .graph import NameGraph, Resolver, alpha_equiv_relabel, to_dot
from .term import Term

EXIT_PARSE = 1
EXIT_IO = 2
EXIT_ALPHA = 3
EXIT_INTERNAL = 4

_PARSE_ERRORS = (lam.ParseError, simpl.ParseError, statemachine.ParseError)


class _Language:
    def __init__(
        self,
        name: str,
        parse: Callable[[str], Term],
        resolver: Resolver,
        pretty: Callable[..., str],
    ) -> None:
        self.name = name
        self.parse = parse
        self.resolver = resolver
        self.pretty = pretty


_LANGUAGES = {
    ".stm": _Language(
        "statemachine",
        statemachine.parse_stm,
        statemachine.STM_RESOLVER,
        statemachine.pretty_stm,
    ),
    ".spl": _Language(
        "simpl", simpl.parse_simpl, simpl.SIMPL_RESOLVER, simpl.pretty_simpl
    ),
    ".lam": _Language(
        "lambda", lam.parse_lambda, lam.LAMBDA_RESOLVER, lam.pretty_lambda
    ),
}


class CliError(Exception):
    def __init__(self, message: str, code: int) -> None:
        super().__init__(message)
        self.code = code


def _language_for(path: Path) -> _Language:
    language = _LANGUAGES.get(path.suffix)
    if language is None:
        raise CliError(
            f"cannot infer language from {path.name!r} "
            f"(expected one of {', '.join(sorted(_LANGUAGES))})",
            EXIT_IO,
        )
    return language


def _read(path: Path) -> str:
    try:
        return path.read_text()
    except OSError as exc:
        raise CliError(str(exc), EXIT_IO) from exc


def _load(path: Path) -> tuple[_Language, Term]:
    language = _language_for(path)
    src = _read(path)
    try:
        return language, language.parse(src)
    except _PARSE_ERRORS as exc:
        raise CliError(f"{path}: {exc}", EXIT_PARSE) from exc


def _emit_graphs(
    args: argparse.Namespace,
    source: Term,
    gs: NameGraph,
    target: Term,
    result: fix.FixResult,
    resolver: Resolver,
) -> None:
    base = Path(args.input)
    paths = [f"{base}.src.dot", f"{base}.tgt.dot"]
    Path(paths[0]).write_text(to_dot(gs, source, title="source"))
    gt = resolver.resolve(target)
    capture = fix.find_capture(gs, gt)
    Path(paths[1]).write_text(
        to_dot(
            gt,
            target,
            capture=[(e.ref, e.decl) for e in capture.edges],
            title="target (before repair)",
        )
    )
    for k, step in enumerate(result.trace.steps, start=1):
        g = resolver.resolve(step.term)
        path = f"{base}.fix{k}.dot"
        Path(path).write_text(to_dot(g, step.term, title=f"after repair round {k}"))
        paths.append(path)
    print("wrote " + ", ".join(paths), file=sys.stderr)


def _print_trace(result: fix.FixResult) -> None:
    if result.trace.steps:
        print(result.trace.format(), file=sys.stderr)
    else:
        print("no capture; output unchanged", file=sys.stderr)


def _run_fixing(
    args: argparse.Namespace,
    source: Term,
    gs: NameGraph,
    target: Term,
    resolver: Resolver,
    pretty: Callable[..., str],
) -> None:
    if getattr(args, "no_fix", False):
        result = fix.FixResult(target, fix.FixTrace())
    else:
        result = fix.name_fix(gs, target, resolver)
    if args.trace:
        _print_trace(result)
    if args.emit_graphs:
        _emit_graphs(args, source, gs, target, result, resolver)
    print(pretty(result.term, show_labels=args.debug_labels), end="")


def cmd_compile(args: argparse.Namespace) -> None:
    path = Path(args.input)
    language, m = _load(path)
    if language.name != "statemachine":
        raise CliError("compile expects a .stm input", EXIT_IO)
    gs = statemachine.resolve_machine(m)
    target = statemachine.compile_machine(m)
    _run_fixing(args, m, gs, target, simpl.SIMPL_RESOLVER, simpl.pretty_simpl)


def cmd_subst(args: argparse.Namespace) -> None:
    path = Path(args.input)
    language, p = _load(path)
    if language.name != "simpl":
        raise CliError("subst expects a .spl input", EXIT_IO)
    try:
        repl = simpl.parse_simpl_exp(args.replacement)
    except simpl.ParseError as exc:
        raise CliError(f"replacement: {exc}", EXIT_PARSE) from exc
    gs = simpl.resolve_simpl(p)
    target = simpl.subst_prog(p, args.name, repl)
    _run_fixing(args, p, gs, target, simpl.SIMPL_RESOLVER, simpl.pretty_simpl)


def cmd_inline(args: argparse.Namespace) -> None:
    path = Path(args.input)
    language, p = _load(path)
    if language.name != "simpl":
        raise CliError("inline expects a .spl input", EXIT_IO)
    try:
        result = simpl.inline(p, args.function)
    except simpl.UnknownFunction as exc:
        raise CliError(f"no top-level function named {exc}", EXIT_IO) from exc
    print(simpl.pretty_simpl(result, show_labels=args.debug_labels), end="")


def cmd_lift(args: argparse.Namespace) -> None:
    path = Path(args.input)
    language, p = _load(path)
    if language.name != "simpl":
        raise CliError("lift expects a .spl input", EXIT_IO)
    result = simpl.lambda_lift(p)
    print(simpl.pretty_simpl(result, show_labels=args.debug_labels), end="")


def cmd_graph(args: argparse.Namespace) -> None:
    path = Path(args.input)
    language, p = _load(path)
    g = language.resolver.resolve(p)
    print(to_dot(g, p, title=path.name), end="")


def cmd_alphacheck(args: argparse.Namespace) -> None:
    path1, path2 = Path(args.first), Path(args.second)
    language1, p1 = _load(path1)
    language2, p2 = _load(path2)
    if language1.name != language2.name:
        raise CliError("alphacheck inputs must share a language", EXIT_IO)
    if alpha_equiv_relabel(p1, p2, language1.resolver):
        print("alpha-equivalent")
    else:
        print("NOT alpha-equivalent")
        raise CliError("programs differ", EXIT_ALPHA)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="namefix",
        description="Capture-free program transformations via name-graph repair.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, no_fix: bool = False) -> None:
        p.add_argument("input", help="input program")
        p.add_argument(
            "--debug-labels",
            action="store_true",
            help="print names with their labels attached",
        )
        if no_fix:
            p.add_argument(
                "--no-fix",
                action="store_true",
                help="skip capture repair (show the naive output)",
            )
            p.add_argument(
                "--trace",
                action="store_true",
                help="print each repair round to stderr",
            )
            p.add_argument(
                "--emit-graphs",
                action="store_true",
                help="write source/target/repair name graphs as .dot files",
            )

    p = sub.add_parser("compile", help="compile a state machine (.stm)")
    add_common(p, no_fix=True)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("subst", help="substitute an expression for a free name")
    add_common(p, no_fix=True)
    p.add_argument("name", help="free name to replace")
    p.add_argument("replacement", help="replacement expression")
    p.set_defaults(func=cmd_subst)

    p = sub.add_parser("inline", help="inline a top-level function (.spl)")
    add_common(p)
    p.add_argument("function", help="name of the function to inline")
    p.set_defaults(func=cmd_inline)

    p = sub.add_parser("lift", help="lift local functions to the top level (.spl)")
    add_common(p)
    p.set_defaults(func=cmd_lift)

    p = sub.add_parser("graph", help="print a program's name graph as Graphviz")
    p.add_argument("input", help="input program")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("alphacheck", help="compare two programs for alpha-equivalence")
    p.add_argument("first")
    p.add_argument("second")
    p.set_defaults(func=cmd_alphacheck)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except CliError as exc:
        if str(exc):
            print(f"namefix: {exc}", file=sys.stderr)
        return exc.code
    except fix.FixError as exc:
        print(f"namefix: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return 0


if __name__ == "__main__":
    sys.exit(main())
