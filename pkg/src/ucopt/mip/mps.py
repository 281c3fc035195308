"""MPS text adapter so models can be handed to external solvers.

Row and column order equals tag order.  Names are the tags themselves,
tuple parts joined by underscores (("u", 2, 5) -> u_2_5), which lets the
importer rebuild the tag structure.  Values print as %.17g, enough digits
for an exact float64 round trip.
"""
import numpy as np

from ..errors import MalformedInput
from .problem import BINARY, CONTINUOUS, LE, EQ, GE, ProblemBuilder

_SENSE_CHAR = {LE: "L", EQ: "E", GE: "G"}
_CHAR_SENSE = {"L": LE, "E": EQ, "G": GE}


def _name_of(tag):
    if isinstance(tag, tuple):
        return "_".join(str(p) for p in tag)
    return str(tag)


def _tag_of(name):
    parts = name.split("_")
    if len(parts) >= 2:
        try:
            nums = [int(p) for p in parts[1:]]
        except ValueError:
            return name
        return (parts[0],) + tuple(nums)
    return name


def _num(v):
    return "%.17g" % v


def export_mps(m):
    """Render a MipProblem as MPS text (returns a string)."""
    out = []
    out.append("NAME          %s" % m.name)
    out.append("ROWS")
    out.append(" N  COST")
    for i in range(m.n_rows):
        out.append(" %s  %s" % (_SENSE_CHAR[int(m.senses[i])],
                                _name_of(m.row_tags[i])))
    # column-major view of the row-major storage
    by_col = [[] for _ in range(m.n_vars)]
    for i in range(m.n_rows):
        cols, vals = m.row(i)
        rname = _name_of(m.row_tags[i])
        for c, v in zip(cols, vals):
            by_col[c].append((rname, v))
    out.append("COLUMNS")
    in_int = False
    marker = 0
    for j in range(m.n_vars):
        is_int = m.var_kinds[j] == BINARY
        if is_int != in_int:
            which = "'INTORG'" if is_int else "'INTEND'"
            out.append("    MARKER%04d                 'MARKER'                 %s"
                       % (marker, which))
            marker += 1
            in_int = is_int
        cname = _name_of(m.var_tags[j])
        out.append("    %-10s %-12s %s" % (cname, "COST", _num(m.obj[j])))
        for rname, v in by_col[j]:
            out.append("    %-10s %-12s %s" % (cname, rname, _num(v)))
    if in_int:
        out.append("    MARKER%04d                 'MARKER'                 'INTEND'"
                   % marker)
    out.append("RHS")
    for i in range(m.n_rows):
        out.append("    %-10s %-12s %s" % ("RHS", _name_of(m.row_tags[i]),
                                           _num(m.rhs[i])))
    out.append("BOUNDS")
    for j in range(m.n_vars):
        cname = _name_of(m.var_tags[j])
        lo, hi = m.lb[j], m.ub[j]
        if lo == hi:
            out.append(" FX %-10s %-12s %s" % ("BND", cname, _num(lo)))
            continue
        if np.isfinite(lo):
            out.append(" LO %-10s %-12s %s" % ("BND", cname, _num(lo)))
        else:
            out.append(" MI %-10s %-12s" % ("BND", cname))
        if np.isfinite(hi):
            out.append(" UP %-10s %-12s %s" % ("BND", cname, _num(hi)))
        else:
            out.append(" PL %-10s %-12s" % ("BND", cname))
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def import_mps(text):
    """Parse MPS text produced by export_mps (whitespace tolerant)."""
    section = None
    name = "imported"
    rows = []                 # (sense, tag) in order
    row_sense = {}
    col_order = []            # column names in order
    col_entries = {}          # name -> list of (rowname, value)
    col_kind = {}
    obj = {}
    rhs = {}
    bounds = {}               # name -> [lo, hi]
    in_int = False
    for raw in text.splitlines():
        if not raw.strip() or raw.lstrip().startswith("*"):
            continue
        if raw[0] not in " \t":
            fields = raw.split()
            head = fields[0].upper()
            if head == "NAME":
                name = fields[1] if len(fields) > 1 else name
                section = "NAME"
            elif head in ("ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS"):
                section = head
            elif head == "ENDATA":
                section = "END"
                break
            else:
                raise MalformedInput("unknown MPS section %r" % head)
            continue
        fields = raw.split()
        if section == "ROWS":
            if len(fields) != 2:
                raise MalformedInput("bad ROWS line: %r" % raw)
            kind, rname = fields[0].upper(), fields[1]
            if kind == "N":
                continue
            if kind not in _CHAR_SENSE:
                raise MalformedInput("unknown row sense %r" % kind)
            rows.append(rname)
            row_sense[rname] = _CHAR_SENSE[kind]
        elif section == "COLUMNS":
            if len(fields) >= 3 and fields[1] == "'MARKER'":
                in_int = fields[2] == "'INTORG'"
                continue
            if len(fields) not in (3, 5):
                raise MalformedInput("bad COLUMNS line: %r" % raw)
            cname = fields[0]
            if cname not in col_entries:
                col_order.append(cname)
                col_entries[cname] = []
                col_kind[cname] = BINARY if in_int else CONTINUOUS
            for k in range(1, len(fields), 2):
                rname, val = fields[k], float(fields[k + 1])
                if rname == "COST":
                    obj[cname] = obj.get(cname, 0.0) + val
                else:
                    col_entries[cname].append((rname, val))
        elif section == "RHS":
            if len(fields) not in (3, 5):
                raise MalformedInput("bad RHS line: %r" % raw)
            for k in range(1, len(fields), 2):
                rhs[fields[k]] = float(fields[k + 1])
        elif section == "RANGES":
            raise MalformedInput("RANGES section not supported")
        elif section == "BOUNDS":
            btype = fields[0].upper()
            if btype in ("MI", "PL", "BV") and len(fields) == 3:
                cname = fields[2]
                val = None
            elif len(fields) == 4:
                cname = fields[2]
                val = float(fields[3])
            else:
                raise MalformedInput("bad BOUNDS line: %r" % raw)
            lo, hi = bounds.get(cname, [0.0, np.inf])
            if btype == "UP":
                hi = val
            elif btype == "LO":
                lo = val
            elif btype == "FX":
                lo = hi = val
            elif btype == "MI":
                lo = -np.inf
            elif btype == "PL":
                hi = np.inf
            elif btype == "BV":
                lo, hi = 0.0, 1.0
                col_kind[cname] = BINARY
            else:
                raise MalformedInput("unknown bound type %r" % btype)
            bounds[cname] = [lo, hi]
        elif section in ("NAME", None):
            raise MalformedInput("data line outside any section: %r" % raw)
    if section != "END":
        raise MalformedInput("missing ENDATA")

    b = ProblemBuilder(name)
    col_of = {}
    for cname in col_order:
        lo, hi = bounds.get(cname, [0.0, np.inf])
        col_of[cname] = b.add_var(cname, col_kind[cname], lb=lo, ub=hi,
                                  obj=obj.get(cname, 0.0), tag=_tag_of(cname))
    per_row = {rname: [] for rname in rows}
    for cname in col_order:
        for rname, val in col_entries[cname]:
            if rname not in per_row:
                raise MalformedInput("entry for undeclared row %r" % rname)
            per_row[rname].append((col_of[cname], val))
    for rname in rows:
        b.add_row(per_row[rname], row_sense[rname], rhs.get(rname, 0.0),
                  tag=_tag_of(rname), name=rname)
    return b.build()
