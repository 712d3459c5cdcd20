"""``kat-horn`` command line front end.

Exit codes: 0 valid/proved, 1 invalid/refuted, 2 residual/unknown,
3 usage or parse error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .decide import DEFAULT_ATOM_CAP, ResourceError, accepts, decide_equal
from .elim import ElimTrace, Residual, eliminate_all, tr_names, translate_tr
from .proofsearch import decompose_s_leq_t, inequalities, search
from .relmodels import (
    RelInterp,
    chain_model,
    evaluate,
    oracle_search,
    satisfies,
)
from .syntax import ParseError, format_equation, format_formula, format_horn, parse_horn
from .terms import Equation, HornFormula, Signature

EXIT_CODES = {
    "valid": 0,
    "proved": 0,
    "eliminated": 0,
    "invalid": 1,
    "refuted": 1,
    "counterexample": 1,
    "residual": 2,
    "unknown": 2,
    "none-found": 2,
}


@dataclass
class RunConfig:
    command: str
    path: str
    max_base: int = 3
    budget: int = 200_000
    depth: int = 8
    tau_max: int = 3
    rho_max: int = 4
    sigma_max: int = 4
    normalize_pbp: bool = False
    json: bool = False
    dot: bool = False
    atom_cap: int = DEFAULT_ATOM_CAP
    evidence: bool = False
    seed: int = 0

    def __post_init__(self):
        for name in ("max_base", "budget", "depth", "tau_max", "rho_max", "sigma_max", "atom_cap"):
            if getattr(self, name) <= 0:
                raise ValueError(f"--{name.replace('_', '-')} must be positive")


@dataclass
class Report:
    command: str
    verdict: str
    formula: str = ""
    result: Optional[str] = None
    witness: Optional[object] = None
    trace: ElimTrace = field(default_factory=ElimTrace)
    notes: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.verdict]

    def to_json(self) -> dict:
        d = {
            "command": self.command,
            "verdict": self.verdict,
            "formula": self.formula,
            "result": self.result,
            "witness": self.witness,
            "trace": self.trace.to_json(),
            "notes": self.notes,
            "timings": self.timings,
        }
        d.update(self.extra)
        return d

    def to_text(self) -> str:
        lines = [f"verdict: {self.verdict.upper()}"]
        if self.formula:
            lines.append(f"input: {self.formula}")
        for step in self.trace.steps:
            consumed = ", ".join(format_equation(e) for e in step.consumed)
            lines.append(f"  [{step.rule}] consumed {consumed}")
            lines.append(f"      -> {format_formula(step.formula)}")
        if self.result:
            lines.append(f"result: {self.result}")
        if self.witness is not None:
            w = self.witness if isinstance(self.witness, str) else json.dumps(self.witness)
            lines.append(f"witness: {w}")
        for note in self.notes:
            lines.append(f"note: {note}")
        for key, val in self.extra.items():
            if key != "dot":
                lines.append(f"{key}: {json.dumps(val)}")
        return "\n".join(lines)


def _load(config: RunConfig) -> HornFormula:
    with open(config.path, encoding="utf-8") as fh:
        return parse_horn(fh.read())


def _verify_word(eq: Equation, word, sig: Signature) -> bool:
    """The witness separates the two sides both as a guarded word and in its
    chain model."""
    in_lhs, in_rhs = accepts(eq.lhs, word, sig), accepts(eq.rhs, word, sig)
    m = chain_model(word, sig)
    end = 1 << (len(word.atoms) - 1)
    rel_l = evaluate(eq.lhs, m)[0] & end != 0
    rel_r = evaluate(eq.rhs, m)[0] & end != 0
    return in_lhs != in_rhs and (rel_l, rel_r) == (in_lhs, in_rhs)


def cmd_check(config: RunConfig) -> Report:
    f = _load(config)
    t0 = time.perf_counter()
    result, trace = eliminate_all(f, normalize=config.normalize_pbp)
    timings = {"eliminate": time.perf_counter() - t0}
    report = Report("check", "unknown", format_formula(f), trace=trace, timings=timings)
    if isinstance(result, Residual):
        report.verdict = "residual"
        report.result = format_formula(result.formula)
        report.notes.append("hypotheses remain that this tool cannot eliminate")
        if config.evidence:
            _add_evidence(report, f, config)
        return report
    eq = result.as_eq()
    report.result = format_equation(eq)
    t1 = time.perf_counter()
    try:
        verdict = decide_equal(eq.lhs, eq.rhs, f.signature, atom_cap=config.atom_cap)
    except ResourceError as exc:
        report.notes.append(f"decider resource limit: {exc}")
        return report
    report.timings["decide"] = time.perf_counter() - t1
    if verdict.valid:
        report.verdict = "valid"
        return report
    if not _verify_word(eq, verdict.witness, f.signature):
        raise AssertionError(f"witness {verdict.witness} failed re-verification")
    report.verdict = "invalid"
    report.witness = str(verdict.witness)
    report.notes.append(f"witness length {len(verdict.witness)} (atoms); re-verified")
    return report


def _add_evidence(report: Report, f: HornFormula, config: RunConfig) -> None:
    """Best-effort oracle and proof search on a residual formula; the
    verdict stays residual."""
    oracle = oracle_search(f, config.max_base, config.budget, config.seed)
    if oracle.model is not None:
        report.notes.append("evidence: the oracle found a relational counterexample")
        report.extra["counterexample"] = oracle.model.to_json()
    else:
        modes = ", ".join(f"base {n}: {m}" for n, m in sorted(oracle.modes.items()))
        report.notes.append(f"evidence: no oracle counterexample ({modes})")
    sub = Report("prove", "unknown")
    _prove(f, config, sub)
    report.notes.append(f"evidence: proof search {sub.verdict}")
    report.extra["proof_search"] = sub.to_json()


def cmd_eliminate(config: RunConfig) -> Report:
    f = _load(config)
    t0 = time.perf_counter()
    result, trace = eliminate_all(f, normalize=config.normalize_pbp)
    report = Report("eliminate", "eliminated", format_formula(f), trace=trace)
    report.timings["eliminate"] = time.perf_counter() - t0
    out = result.formula if isinstance(result, Residual) else HornFormula((), result, f.signature)
    report.result = format_formula(out)
    report.extra["horn"] = format_horn(out)
    return report


def cmd_oracle(config: RunConfig) -> Report:
    f = _load(config)
    t0 = time.perf_counter()
    res = oracle_search(f, config.max_base, config.budget, config.seed)
    report = Report("oracle", "none-found", format_formula(f))
    report.timings["oracle"] = time.perf_counter() - t0
    modes = ", ".join(f"base {n}: {m}" for n, m in sorted(res.modes.items()))
    report.notes.append(f"{res.checked} interpretations checked ({modes})")
    if res.model is None:
        report.result = f"none found (bound: base <= {config.max_base}, budget {config.budget})"
        return report
    if satisfies(res.model, f):
        raise AssertionError("oracle counterexample failed re-verification")
    report.verdict = "counterexample"
    report.witness = res.model.to_json()
    return report


def _model_back(m: RelInterp, f: HornFormula) -> RelInterp:
    """Turn a countermodel of the test-free translation into one of ``f``."""
    names = tr_names(f.signature)
    progs = {p: r for p, r in m.progs.items() if p in f.signature.programs}
    tests = {}
    for b, (pos, _) in names.items():
        rel = m.progs[pos]
        tests[b] = sum(1 << i for i in range(m.n) if rel[i] >> i & 1)
    return RelInterp(m.n, progs, tests)


def _prove(f: HornFormula, config: RunConfig, report: Report) -> None:
    """Search for a proof or countermodel of ``f``; fills in ``report``."""
    g = translate_tr(f)
    if g is not f:
        report.notes.append(f"tests translated to programs: {format_formula(g)}")
    E = inequalities(g.hypotheses)
    t0 = time.perf_counter()
    all_proved = True
    outcomes = report.extra.setdefault("subgoals", [])
    for s, t in g.conclusion.as_inequalities():
        subgoals, truncated = decompose_s_leq_t(E, s, t, config.sigma_max)
        if truncated:
            all_proved = False
            report.notes.append(f"R({s}) has strings longer than {config.sigma_max}; goal truncated")
        for _, sigma, tt in subgoals:
            out = search(E, sigma, tt, config.depth, config.tau_max, config.rho_max)
            outcomes.append({"sigma": " ".join(sigma) or "1", "t": str(tt), "kind": out.kind, **out.report})
            if out.kind == "refuted":
                # a model refuting sigma <= t also refutes s <= t, since sigma is in R(s)
                original = _model_back(out.model, f) if g is not f else out.model
                if satisfies(out.model, g) or satisfies(original, f):
                    raise AssertionError("countermodel failed re-verification")
                report.verdict = "refuted"
                report.witness = original.to_json()
                if config.dot:
                    report.extra["dot"] = out.path[-1].automaton.to_dot()
                report.timings["search"] = time.perf_counter() - t0
                return
            if out.kind != "proved":
                all_proved = False
            elif config.dot:
                report.extra.setdefault("dot", "")
                report.extra["dot"] += "\n".join(
                    n.automaton.to_dot(f"node{i}")
                    for i, n in enumerate(out.tree.walk())
                    if n.status != "con"
                ) + "\n"
    report.timings["search"] = time.perf_counter() - t0
    if all_proved:
        report.verdict = "proved"
    else:
        report.verdict = "unknown"
        report.notes.append(
            f"bounds: depth {config.depth}, tau_max {config.tau_max}, rho_max {config.rho_max}"
        )


def cmd_prove(config: RunConfig) -> Report:
    f = _load(config)
    report = Report("prove", "unknown", format_formula(f))
    _prove(f, config, report)
    return report


COMMANDS = {
    "check": cmd_check,
    "eliminate": cmd_eliminate,
    "oracle": cmd_oracle,
    "prove": cmd_prove,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="kat-horn",
        description="Eliminate r=0 and cp=c hypotheses from KAT Horn formulas and decide the result.",
    )
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("path", metavar="FILE")
    p.add_argument("--max-base", type=int, default=3, help="largest base size for the oracle")
    p.add_argument("--budget", type=int, default=200_000, help="interpretations per base size")
    p.add_argument("--depth", type=int, default=8, help="proof tree depth bound")
    p.add_argument("--tau-max", type=int, default=3, help="longest inserted string")
    p.add_argument("--rho-max", type=int, default=4, help="longest matched hypothesis string")
    p.add_argument("--sigma-max", type=int, default=4, help="longest string of R(s) to prove")
    p.add_argument("--atom-cap", type=int, default=DEFAULT_ATOM_CAP, help="most tests the decider expands")
    p.add_argument("--normalize-pbp", action="store_true", help="rewrite x;b = x to x;!b = 0")
    p.add_argument("--evidence", action="store_true", help="run the oracle on residual formulas")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--dot", action="store_true", help="emit proof automata in DOT format")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 3
    try:
        config = RunConfig(
            command=args.command,
            path=args.path,
            max_base=args.max_base,
            budget=args.budget,
            depth=args.depth,
            tau_max=args.tau_max,
            rho_max=args.rho_max,
            sigma_max=args.sigma_max,
            normalize_pbp=args.normalize_pbp,
            json=args.json,
            dot=args.dot,
            atom_cap=args.atom_cap,
            evidence=args.evidence,
            seed=int(os.environ.get("KAT_HORN_SEED", "0")),
        )
        report = COMMANDS[config.command](config)
    except (ParseError, ValueError, OSError) as exc:
        print(f"kat-horn: error: {exc}", file=sys.stderr)
        return 3
    if config.json:
        print(json.dumps(report.to_json(), indent=2))
    else:
        print(report.to_text())
        if config.dot and "dot" in report.extra:
            print(report.extra["dot"])
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
