"""LP text format export and a minimal reader for our own files.

The writer emits Maximize / Subject To / Bounds / Binaries / End sections,
with every variable listed in Bounds in program order and coefficients in
shortest round-trip repr.  The reader understands that subset of the
format, plus single-sided bounds and ``Minimize``.
"""

from __future__ import annotations

import re
from pathlib import Path

from .program import EQ, GE, LE, Constraint, MilpProgram, Variable

_TERMS_PER_LINE = 8
_SENSES = {"<=": LE, "=<": LE, "<": LE, ">=": GE, "=>": GE, ">": GE, "=": EQ}


class LpFormatError(ValueError):
    pass


def _num(a: float) -> str:
    return repr(float(a))


def _expr(coefs: dict[str, float]) -> list[str]:
    terms = [f"{'-' if c < 0 else '+'} {_num(abs(c))} {name}" for name, c in coefs.items()]
    if not terms:
        return ["0"]
    return [" ".join(terms[k : k + _TERMS_PER_LINE]) for k in range(0, len(terms), _TERMS_PER_LINE)]


def format_lp(program: MilpProgram) -> str:
    out = ["\\ DDN MPE program", "Maximize"]
    lines = _expr(program.objective)
    out.append(" obj: " + lines[0])
    out.extend("   " + ln for ln in lines[1:])
    out.append("Subject To")
    for con in program.constraints:
        lines = _expr(con.coefs)
        lines[-1] += f" {con.sense} {_num(con.rhs)}"
        out.append(f" {con.name}: " + lines[0])
        out.extend("   " + ln for ln in lines[1:])
    out.append("Bounds")
    for var in program.variables:
        out.append(f" {_num(var.lb)} <= {var.name} <= {_num(var.ub)}")
    out.append("Binaries")
    out.extend(f" {var.name}" for var in program.variables if var.binary)
    out.append("End")
    return "\n".join(out) + "\n"


def export_lp(program: MilpProgram, path) -> None:
    Path(path).write_text(format_lp(program))


# reader

_SECTIONS = {
    "maximize": "max",
    "maximise": "max",
    "maximum": "max",
    "max": "max",
    "minimize": "min",
    "minimise": "min",
    "minimum": "min",
    "min": "min",
    "subject to": "st",
    "such that": "st",
    "st": "st",
    "s.t.": "st",
    "bounds": "bounds",
    "bound": "bounds",
    "binaries": "bin",
    "binary": "bin",
    "bin": "bin",
    "end": "end",
}

_TOKEN = re.compile(r"\s*([<>=]+|[+-]|[^\s<>=+-]+)")
_NUMBER = re.compile(r"^(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$|^inf(inity)?$", re.IGNORECASE)


def _tokens(text: str) -> list[str]:
    toks, pos = [], 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise LpFormatError(f"cannot tokenize {text[pos:]!r}")
        toks.append(m.group(1))
        pos = m.end()
    # glue exponents split by the sign tokenizer, e.g. "1e" "-" "05"
    glued: list[str] = []
    for tok in toks:
        if len(glued) >= 2 and glued[-1] in "+-" and re.fullmatch(r"\d+\.?\d*[eE]|\.\d+[eE]", glued[-2]):
            sign = glued.pop()
            glued[-1] += sign + tok
        else:
            glued.append(tok)
    return glued


def _parse_expr(toks: list[str]) -> dict[str, float]:
    coefs: dict[str, float] = {}
    sign, coef = 1.0, None
    for tok in toks:
        if tok in "+-":
            sign = -sign if tok == "-" else sign
        elif _is_num(tok):
            coef = float(tok) if coef is None else coef * float(tok)
        else:
            coefs[tok] = coefs.get(tok, 0.0) + sign * (1.0 if coef is None else coef)
            sign, coef = 1.0, None
    if coef is not None and coef != 0.0:
        raise LpFormatError("constant terms are not supported")
    return coefs


def _split_name(stmt: str) -> tuple[str | None, str]:
    m = re.match(r"\s*([^\s:]+)\s*:(.*)$", stmt, re.S)
    return (m.group(1), m.group(2)) if m else (None, stmt)


def _statements(lines: list[str]) -> list[str]:
    # a statement continues until a line that starts a new named row
    stmts: list[str] = []
    for ln in lines:
        if stmts and not re.match(r"\s*[^\s:]+\s*:", ln):
            stmts[-1] += " " + ln
        else:
            stmts.append(ln)
    return stmts


def parse_lp(text: str) -> MilpProgram:
    sections: dict[str, list[str]] = {"max": [], "min": [], "st": [], "bounds": [], "bin": []}
    current = None
    sense_seen = None
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        key = _SECTIONS.get(line.lower())
        if key == "end":
            break
        if key is not None:
            current = key
            if key in ("max", "min"):
                sense_seen = key
            continue
        if current is None:
            raise LpFormatError(f"content before the first section: {line!r}")
        sections[current].append(line)
    if sense_seen is None:
        raise LpFormatError("missing objective section")

    obj_text = " ".join(sections[sense_seen])
    _, obj_body = _split_name(obj_text)
    objective = _parse_expr(_tokens(obj_body))
    if sense_seen == "min":
        objective = {k: -c for k, c in objective.items()}

    constraints: list[Constraint] = []
    for k, stmt in enumerate(_statements(sections["st"])):
        name, body = _split_name(stmt)
        toks = _merge_signed(_tokens(body))
        ops = [j for j, t in enumerate(toks) if t in _SENSES]
        if len(ops) != 1 or ops[0] != len(toks) - 2:
            raise LpFormatError(f"cannot parse constraint {stmt!r}")
        j = ops[0]
        rhs = float(toks[j + 1])
        constraints.append(Constraint(name or f"R{k}", _parse_expr(toks[:j]), _SENSES[toks[j]], rhs))

    bounds: dict[str, list[float]] = {}
    order: list[str] = []

    def touch(name: str):
        if name not in bounds:
            bounds[name] = [0.0, float("inf")]
            order.append(name)

    for line in sections["bounds"]:
        toks = _tokens(line)
        toks = _merge_signed(toks)
        if len(toks) == 2 and toks[1].lower() == "free":
            touch(toks[0])
            bounds[toks[0]] = [float("-inf"), float("inf")]
        elif len(toks) == 5 and toks[1] in _SENSES and toks[3] in _SENSES:
            touch(toks[2])
            bounds[toks[2]] = [float(toks[0]), float(toks[4])]
        elif len(toks) == 3 and toks[1] in _SENSES:
            name, val = (toks[0], float(toks[2])) if not _is_num(toks[0]) else (toks[2], float(toks[0]))
            flipped = _is_num(toks[0])
            touch(name)
            op = _SENSES[toks[1]]
            if op == EQ:
                bounds[name] = [val, val]
            elif (op == LE) != flipped:
                bounds[name][1] = val
            else:
                bounds[name][0] = val
        else:
            raise LpFormatError(f"cannot parse bound {line!r}")

    binaries = set()
    for line in sections["bin"]:
        for name in line.split():
            touch(name)
            binaries.add(name)
    for name in objective:
        touch(name)
    for con in constraints:
        for name in con.coefs:
            touch(name)

    variables = []
    for name in order:
        lb, ub = bounds[name]
        if name in binaries:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        variables.append(Variable(name, lb, ub, name in binaries))
    return MilpProgram(variables, constraints, objective)


def _is_num(tok: str) -> bool:
    return bool(_NUMBER.match(tok.lstrip("+-")))


def _merge_signed(toks: list[str]) -> list[str]:
    out: list[str] = []
    for tok in toks:
        if out and out[-1] in "+-" and (len(out) == 1 or out[-2] in _SENSES) and _is_num(tok):
            out[-1] += tok
        else:
            out.append(tok)
    return out


def read_lp(path) -> MilpProgram:
    return parse_lp(Path(path).read_text())
