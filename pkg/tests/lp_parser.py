"""Minimal LP-format reader used to verify exported models.

Supports the subset the exporter emits: a Maximize objective, named
constraints with <=, >=, or =, a Bounds section, Generals, and Binary.
"""

from dataclasses import dataclass, field


@dataclass
class ParsedLP:
    objective: dict[str, float]
    constraints: list[tuple[str, dict[str, float], str, float]]
    bounds: dict[str, tuple[float, float]]
    generals: set[str] = field(default_factory=set)
    binaries: set[str] = field(default_factory=set)

    def variables(self) -> list[str]:
        seen = dict.fromkeys(self.objective)
        for _name, coefs, _sense, _rhs in self.constraints:
            seen.update(dict.fromkeys(coefs))
        seen.update(dict.fromkeys(self.bounds))
        seen.update(dict.fromkeys(sorted(self.generals | self.binaries)))
        return list(seen)


def _parse_terms(tokens):
    coefs = {}
    sign = 1.0
    pending = None
    for tok in tokens:
        if tok == "+":
            sign = 1.0
            continue
        if tok == "-":
            sign = -1.0
            continue
        try:
            pending = float(tok)
            continue
        except ValueError:
            pass
        coef = pending if pending is not None else 1.0
        coefs[tok] = coefs.get(tok, 0.0) + sign * coef
        sign, pending = 1.0, None
    return coefs


def parse_lp(text: str) -> ParsedLP:
    objective: dict[str, float] = {}
    constraints = []
    bounds: dict[str, tuple[float, float]] = {}
    generals: set[str] = set()
    binaries: set[str] = set()

    section = None
    for raw_line in text.splitlines():
        line = raw_line.split("\\")[0].strip()
        if not line:
            continue
        lowered = line.lower()
        if lowered in ("maximize", "minimize"):
            section = "objective"
            continue
        if lowered == "subject to":
            section = "constraints"
            continue
        if lowered == "bounds":
            section = "bounds"
            continue
        if lowered in ("generals", "general"):
            section = "generals"
            continue
        if lowered in ("binary", "binaries"):
            section = "binary"
            continue
        if lowered == "end":
            break

        if section == "objective":
            body = line.split(":", 1)[1] if ":" in line else line
            objective.update(_parse_terms(body.split()))
        elif section == "constraints":
            name, body = line.split(":", 1)
            for sense in ("<=", ">=", "="):
                if sense in body:
                    lhs, rhs = body.rsplit(sense, 1)
                    constraints.append(
                        (name.strip(), _parse_terms(lhs.split()), sense, float(rhs))
                    )
                    break
        elif section == "bounds":
            parts = line.split("<=")
            if len(parts) == 3:
                lo, var, hi = parts
                bounds[var.strip()] = (float(lo), float(hi))
            elif len(parts) == 2:
                var, hi = parts
                bounds[var.strip()] = (0.0, float(hi))
        elif section == "generals":
            generals.update(line.split())
        elif section == "binary":
            binaries.update(line.split())

    return ParsedLP(objective, constraints, bounds, generals, binaries)


def solve_with_highs(parsed: ParsedLP) -> tuple[float, dict[str, float]]:
    """Optimize a parsed model with scipy's HiGHS MILP backend."""
    import numpy as np
    from scipy.optimize import Bounds, LinearConstraint, milp

    variables = parsed.variables()
    index = {v: i for i, v in enumerate(variables)}
    n = len(variables)
    c = np.zeros(n)
    for var, coef in parsed.objective.items():
        c[index[var]] = -coef  # milp minimizes

    rows, lo, hi = [], [], []
    for _name, coefs, sense, rhs in parsed.constraints:
        row = np.zeros(n)
        for var, coef in coefs.items():
            row[index[var]] = coef
        rows.append(row)
        if sense == "<=":
            lo.append(-np.inf)
            hi.append(rhs)
        elif sense == ">=":
            lo.append(rhs)
            hi.append(np.inf)
        else:
            lo.append(rhs)
            hi.append(rhs)

    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    for var, (b_lo, b_hi) in parsed.bounds.items():
        lb[index[var]] = b_lo
        ub[index[var]] = b_hi
    for var in parsed.binaries:
        lb[index[var]] = max(lb[index[var]], 0.0)
        ub[index[var]] = min(ub[index[var]], 1.0)

    result = milp(
        c=c,
        constraints=LinearConstraint(np.array(rows), np.array(lo), np.array(hi)),
        integrality=np.ones(n),
        bounds=Bounds(lb, ub),
    )
    if not result.success:
        raise RuntimeError(f"external MILP solve failed: {result.message}")
    values = {v: float(result.x[index[v]]) for v in variables}
    return -float(result.fun), values
