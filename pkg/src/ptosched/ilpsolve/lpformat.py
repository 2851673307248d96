"""Text dump of a :class:`MipModel` in the CPLEX LP dialect.

The subset written (and read back by :func:`read_lp`)::

    \\ comment line
    Minimize
     obj: 2 x + 3 y + 1.5
    Subject To
     r0: x + y >= 1
    Bounds
     0 <= x <= 1
     0 <= y <= +inf
    Binaries
     x
    End

One constraint per line; every column appears in ``Bounds`` in model order. Variable names are sanitized to ``[A-Za-z0-9_]``
with a leading ``v`` if needed; the objective constant is emitted as a bare
number term, which CPLEX, Gurobi, HiGHS and GLPK all accept.
"""

from __future__ import annotations

import math
import re

from .model import BINARY, CONTINUOUS, EQ, GE, LE, MipModel, ModelError

_SENSE_TEXT = {LE: "<=", GE: ">=", EQ: "="}


def _safe(name: str) -> str:
    s = re.sub(r"[^A-Za-z0-9_]", "_", name)
    if not s or not (s[0].isalpha() or s[0] == "_"):
        s = "v" + s
    return s


def _fmt(a: float) -> str:
    return repr(float(a))


def _expr(coeffs: dict[int, float], names: list[str]) -> str:
    parts = []
    for j in sorted(coeffs):
        a = coeffs[j]
        sign = "-" if a < 0 else "+"
        parts.append(f"{sign} {_fmt(abs(a))} {names[j]}")
    text = " ".join(parts)
    if text.startswith("+ "):
        text = text[2:]
    return text or "0 " + (names[0] if names else "")


def write_lp(model: MipModel) -> str:
    names = []
    seen = set()
    for nm in model.var_names:
        s = _safe(nm)
        base, k = s, 1
        while s in seen:
            s = f"{base}_{k}"
            k += 1
        seen.add(s)
        names.append(s)

    lines = [f"\\ {model.name}", "Minimize"]
    obj = _expr(model.objective, names) if model.objective else ""
    if model.obj_constant:
        sign = "-" if model.obj_constant < 0 else "+"
        obj = f"{obj} {sign} {_fmt(abs(model.obj_constant))}".strip()
    lines.append(f" obj: {obj}" if obj else " obj:")
    lines.append("Subject To")
    for k, con in enumerate(model.constraints):
        lhs = _expr(con.coeffs, names) if con.coeffs else f"0 {names[0]}"
        lines.append(f" r{k}: {lhs} {_SENSE_TEXT[con.sense]} {_fmt(con.rhs)}")
    lines.append("Bounds")
    # every column is listed so that reading back preserves column order
    for j in range(model.n_vars):
        ub = model.var_ub[j]
        lines.append(f" 0 <= {names[j]} <= {'+inf' if math.isinf(ub) else _fmt(ub)}")
    bins = [names[j] for j, kind in enumerate(model.var_kinds) if kind == BINARY]
    if bins:
        lines.append("Binaries")
        for k in range(0, len(bins), 8):
            lines.append(" " + " ".join(bins[k : k + 8]))
    lines.append("End")
    return "\n".join(lines) + "\n"


_TOKEN = re.compile(
    r"\s*(?:(?P<sign>[+-])|(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*))"
)


def _parse_expr(text: str):
    """Split ``2 x - 3.5e-1 y + 4`` into ``[(name, coef)]`` and a constant."""
    terms, constant = [], 0.0
    sign, coef = 1.0, None
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ModelError(f"cannot parse expression {text!r}")
        pos = m.end()
        if m.group("sign"):
            if coef is not None:
                constant += sign * coef
                coef = None
                sign = 1.0
            sign = -sign if m.group("sign") == "-" else sign
        elif m.group("num"):
            coef = float(m.group("num"))
        else:
            terms.append((m.group("name"), sign * (1.0 if coef is None else coef)))
            sign, coef = 1.0, None
    if coef is not None:
        constant += sign * coef
    return terms, constant


def read_lp(text: str) -> MipModel:
    """Parse the dialect produced by :func:`write_lp`."""
    section = None
    obj_text = ""
    cons = []
    bounds: dict[str, float] = {}
    bins: list[str] = []
    name = "model"
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("\\"):
            name = line[1:].strip() or name
            continue
        low = line.lower()
        if low in ("minimize", "subject to", "bounds", "binaries", "end"):
            section = low
            continue
        if section == "minimize":
            obj_text += " " + line.split(":", 1)[-1]
        elif section == "subject to":
            body = line.split(":", 1)[-1]
            m = re.match(r"(.*?)(<=|>=|=)\s*(\S+)\s*$", body)
            if not m:
                raise ModelError(f"cannot parse constraint line {line!r}")
            cons.append((m.group(1), m.group(2), float(m.group(3))))
        elif section == "bounds":
            m = re.match(r"0\s*<=\s*(\S+)\s*<=\s*(\S+)$", line)
            if not m:
                raise ModelError(f"cannot parse bound line {line!r}")
            bounds[m.group(1)] = math.inf if m.group(2) == "+inf" else float(m.group(2))
        elif section == "binaries":
            bins.extend(line.split())

    model = MipModel(name)
    bin_set = set(bins)

    def var(nm: str) -> int:
        if nm not in model._index:
            kind = BINARY if nm in bin_set else CONTINUOUS
            model.add_variable(nm, kind, bounds.get(nm, math.inf))
        return model.index(nm)

    for nm in list(bounds) + bins:
        var(nm)
    terms, const = _parse_expr(obj_text)
    model.set_objective([(var(nm), a) for nm, a in terms], const)
    inv = {"<=": LE, ">=": GE, "=": EQ}
    for lhs, sense, rhs in cons:
        terms, const = _parse_expr(lhs)
        model.add_constraint([(var(nm), a) for nm, a in terms], inv[sense], rhs - const)
    return model
