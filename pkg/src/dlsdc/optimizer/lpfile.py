"""CPLEX-style LP text files, plus a plain ``name value`` solution format.

Use these to hand large instances to an external MILP solver and read its
answer back.
"""

from __future__ import annotations

import math
import re
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .milp import MilpProblem, MilpSolution, Status

_TERMS_PER_LINE = 6
_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\[\]]*$")


def _num(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _expr_lines(terms: Iterable[tuple[float, str]], constant: float = 0.0) -> list[str]:
    parts = []
    for coef, name in terms:
        if coef == 0:
            continue
        sign = "-" if coef < 0 else "+"
        parts.append(f"{sign} {_num(abs(coef))} {name}")
    if constant:
        parts.append(f"{'-' if constant < 0 else '+'} {_num(abs(constant))}")
    if not parts:
        parts = ["0"]
    elif parts[0].startswith("+ "):
        parts[0] = parts[0][2:]
    return [" ".join(parts[i:i + _TERMS_PER_LINE]) for i in range(0, len(parts), _TERMS_PER_LINE)]


def export_lp(problem: MilpProblem, path: str | Path) -> None:
    names = [v.name for v in problem.variables]
    for name in names:
        if not _NAME_RE.match(name):
            raise ValueError(f"variable name {name!r} is not LP-format safe")
    out = []
    meta = " ".join(f"{k}={problem.metadata[k]}" for k in sorted(problem.metadata)
                    if isinstance(problem.metadata[k], (str, int, float)))
    out.append(f"\\ dlsdc {meta}".rstrip())
    out.append("Maximize")
    obj_lines = _expr_lines(((problem.objective[j], names[j]) for j in sorted(problem.objective)),
                            problem.objective_constant)
    out.append(f" obj: {obj_lines[0]}")
    out.extend(f"   {line}" for line in obj_lines[1:])
    out.append("Subject To")
    for con in problem.constraints:
        lines = _expr_lines((con.coeffs[j], names[j]) for j in sorted(con.coeffs))
        op = {"<=": "<=", ">=": ">=", "==": "="}[con.sense]
        lines[-1] = f"{lines[-1]} {op} {_num(con.rhs)}"
        out.append(f" {con.name}: {lines[0]}")
        out.extend(f"   {line}" for line in lines[1:])
    out.append("Bounds")
    binaries, generals = [], []
    for v in problem.variables:
        if v.integer and v.lb == 0 and v.ub == 1:
            binaries.append(v.name)
            continue
        if v.integer:
            generals.append(v.name)
        if math.isinf(v.lb) and math.isinf(v.ub):
            out.append(f" {v.name} free")
        elif math.isinf(v.ub):
            out.append(f" {v.name} >= {_num(v.lb)}")
        elif math.isinf(v.lb):
            out.append(f" -inf <= {v.name} <= {_num(v.ub)}")
        else:
            out.append(f" {_num(v.lb)} <= {v.name} <= {_num(v.ub)}")
    if generals:
        out.append("General")
        out.extend(f" {n}" for n in generals)
    if binaries:
        out.append("Binary")
        out.extend(f" {n}" for n in binaries)
    out.append("End")
    Path(path).write_text("\n".join(out) + "\n")


# --- reading ----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<op><=|>=|=<|=>|<|>|=)|(?P<num>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?|[+-]?inf(?:inity)?(?![A-Za-z0-9_]))"
    r"|(?P<sign>[+-])|(?P<colon>:)|(?P<name>[A-Za-z_][A-Za-z0-9_.\[\]]*))",
    re.IGNORECASE,
)

_SECTIONS = {
    "maximize": "max", "maximum": "max", "max": "max",
    "minimize": "min", "minimum": "min", "min": "min",
    "subject to": "st", "such that": "st", "st": "st", "s.t.": "st",
    "bounds": "bounds", "bound": "bounds",
    "general": "general", "generals": "general", "integers": "general", "gen": "general",
    "binary": "binary", "binaries": "binary", "bin": "binary",
    "end": "end",
}


def _tokens(text: str) -> list[tuple[str, str]]:
    out, pos = [], 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse LP text near {text[pos:pos + 30]!r}")
        kind = m.lastgroup
        out.append((kind, m.group(kind)))
        pos = m.end()
    return out


def _parse_num(s: str) -> float:
    return float(s.lower().replace("infinity", "inf"))


def _linear(tokens: list[tuple[str, str]]) -> tuple[dict[str, float], float]:
    """Parse ``[sign] [coef] name ...`` into coefficients and a constant."""
    coeffs: dict[str, float] = {}
    constant = 0.0
    sign, coef = 1.0, None
    for kind, text in tokens:
        if kind == "sign":
            sign = -sign if text == "-" else sign
        elif kind == "num":
            if coef is not None:
                constant += sign * coef
                sign = 1.0
            coef = _parse_num(text)
        elif kind == "name":
            coeffs[text] = coeffs.get(text, 0.0) + sign * (1.0 if coef is None else coef)
            sign, coef = 1.0, None
        else:
            raise ValueError(f"unexpected token {text!r}")
    if coef is not None:
        constant += sign * coef
    return coeffs, constant


def read_lp(path: str | Path) -> MilpProblem:
    """Parse the subset of the LP format that ``export_lp`` writes (plus minimization)."""
    sections: dict[str, list[str]] = {"max": [], "min": [], "st": [], "bounds": [], "general": [], "binary": []}
    current = None
    for raw in Path(path).read_text().splitlines():
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        key = _SECTIONS.get(line.lower())
        if key is not None:
            if key == "end":
                break
            current = key
            continue
        if current is None:
            raise ValueError(f"text outside any section: {raw!r}")
        sections[current].append(line)

    order: list[str] = []
    declared: dict[str, tuple[float, float, bool]] = {}

    def see(name: str) -> None:
        if name not in declared:
            declared[name] = (0.0, math.inf, False)
            order.append(name)

    sense = "max" if sections["max"] or not sections["min"] else "min"
    obj_tokens = _tokens(" ".join(sections[sense]))
    if len(obj_tokens) >= 2 and obj_tokens[1][0] == "colon":
        obj_tokens = obj_tokens[2:]
    obj, obj_const = _linear(obj_tokens)
    for n in obj:
        see(n)

    rows = []
    toks = _tokens(" ".join(sections["st"]))
    i = 0
    while i < len(toks):
        name = None
        if i + 1 < len(toks) and toks[i][0] == "name" and toks[i + 1][0] == "colon":
            name = toks[i][1]
            i += 2
        j = i
        while j < len(toks) and toks[j][0] != "op":
            j += 1
        if j + 1 >= len(toks):
            raise ValueError("constraint without relation or right-hand side")
        coeffs, const = _linear(toks[i:j])
        op = toks[j][1].replace("=<", "<=").replace("=>", ">=")
        op = {"<": "<=", ">": ">=", "=": "=="}.get(op, op)
        k = j + 1
        rsign = 1.0
        while toks[k][0] == "sign":
            rsign = -rsign if toks[k][1] == "-" else rsign
            k += 1
        rhs = rsign * _parse_num(toks[k][1]) - const
        for n in coeffs:
            see(n)
        rows.append((name, coeffs, op, rhs))
        i = k + 1

    for line in sections["bounds"]:
        t = _tokens(line)
        kinds = [k for k, _ in t]
        if kinds == ["name", "name"] and t[1][1].lower() == "free":
            see(t[0][1])
            declared[t[0][1]] = (-math.inf, math.inf, declared[t[0][1]][2])
        elif kinds == ["num", "op", "name", "op", "num"]:
            see(t[2][1])
            declared[t[2][1]] = (_parse_num(t[0][1]), _parse_num(t[4][1]), declared[t[2][1]][2])
        elif kinds == ["name", "op", "num"]:
            name, op, val = t[0][1], t[1][1], _parse_num(t[2][1])
            see(name)
            lb, ub, integer = declared[name]
            if op in (">=", "=>", ">"):
                lb = val
            elif op in ("<=", "=<", "<"):
                ub = val
            else:
                lb = ub = val
            declared[name] = (lb, ub, integer)
        else:
            raise ValueError(f"unsupported bound line {line!r}")
    for name in " ".join(sections["general"]).split():
        see(name)
        lb, ub, _ = declared[name]
        declared[name] = (lb, ub, True)
    for name in " ".join(sections["binary"]).split():
        see(name)
        declared[name] = (0.0, 1.0, True)

    problem = MilpProblem()
    for name in order:
        lb, ub, integer = declared[name]
        problem.add_variable(name, lb, ub, integer)
    flip = -1.0 if sense == "min" else 1.0
    for name, c in obj.items():
        if c:
            problem.objective[problem.index(name)] = flip * c
    problem.objective_constant = flip * obj_const
    for name, coeffs, op, rhs in rows:
        problem.add_constraint({problem.index(n): c for n, c in coeffs.items()}, op, rhs, name)
    return problem


# --- solutions --------------------------------------------------------------

def write_solution(solution: MilpSolution, path: str | Path) -> None:
    lines = [f"objective {repr(float(solution.objective)) if solution.objective is not None else 'nan'}",
             f"status {solution.status.value}"]
    if solution.values is not None:
        lines.extend(f"{n} {repr(float(v))}" for n, v in zip(solution.names, solution.values))
    Path(path).write_text("\n".join(lines) + "\n")


def read_solution(path: str | Path, problem: MilpProblem) -> MilpSolution:
    """Read ``name value`` lines into a solution aligned with ``problem``.

    Variables the file does not mention are taken as zero. The objective
    header is kept if present, otherwise recomputed from the values.
    """
    names = tuple(v.name for v in problem.variables)
    index = {n: i for i, n in enumerate(names)}
    values = np.zeros(len(names))
    objective: Optional[float] = None
    status = Status.OPTIMAL
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'name value', got {raw!r}")
        key, val = parts
        if key.lower() in ("objective", "obj"):
            objective = float(val)
        elif key.lower() == "status":
            status = Status(val)
        elif key in index:
            values[index[key]] = float(val)
        else:
            raise ValueError(f"{path}:{lineno}: unknown variable {key}")
    if objective is None or math.isnan(objective):
        objective = problem.evaluate(values)
    return MilpSolution(status, objective, values, objective, names)
