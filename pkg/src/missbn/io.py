"""Text formats: BIF-subset network files and CSV datasets with `?` markers.

Network grammar (whitespace-insensitive, ``//`` line comments)::

    network <name> { }
    variable <name> { type discrete [ <k> ] { s1, ..., sk }; }
    probability ( <child> | <p1>, ... ) { ( u1, ... ): v1, ..., vk; ... }
    probability ( <child> ) { table v1, ..., vk; }

Missingness graphs extend the same file with::

    mechanism <var> { parents p1, ...; table v1, ...; }
    informed { w1, ... }

where a mechanism ``table`` lists, per parent instantiation in mixed-radix
order, the pair ``Pr(ob), Pr(unob)``.

Datasets are comma-separated, no quoting, header row of variable names,
missing cells written as ``?``.  Names and state labels are restricted to
``[A-Za-z0-9_]`` (labels may be bare integers) so round trips are bit-exact.
"""

from __future__ import annotations

import re

import numpy as np

from .dataset import IncompleteDataset, MISSING
from .errors import ParseError, RaggedRow, UnknownStateLabel
from .missingness import MechanismSpec, MissingnessGraph
from .network import BayesianNetwork, Variable, all_instantiations, validate

# Number of read_dataset calls, for I/O-count assertions in tests.
DATASET_READS = 0

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUMBER = re.compile(r"[0-9]+(\.[0-9]*)?([eE][-+]?[0-9]+)?|\.[0-9]+([eE][-+]?[0-9]+)?")
_INTEGER = re.compile(r"[0-9]+$")
_PUNCT = ("{", "}", "(", ")", "[", "]", "|", ",", ";", ":")


class _Tokenizer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def _advance(self, n: int):
        for ch in self.text[self.pos : self.pos + n]:
            if ch == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
        self.pos += n

    def _skip_space(self):
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch in " \t\r\n":
                self._advance(1)
            elif self.text.startswith("//", self.pos):
                end = self.text.find("\n", self.pos)
                self._advance((end if end >= 0 else len(self.text)) - self.pos)
            else:
                return

    def peek(self) -> tuple[str, str] | None:
        """Return (kind, token) without consuming, or None at end of input."""
        self._skip_space()
        if self.pos >= len(self.text):
            return None
        ch = self.text[self.pos]
        if ch in _PUNCT:
            return ("punct", ch)
        m = _NUMBER.match(self.text, self.pos)
        if m:
            return ("number", m.group())
        m = _IDENT.match(self.text, self.pos)
        if m:
            return ("ident", m.group())
        raise ParseError(self.line, self.col, f"unexpected character {ch!r}")

    def next(self) -> tuple[str, str]:
        tok = self.peek()
        if tok is None:
            raise ParseError(self.line, self.col, "unexpected end of input")
        self._advance(len(tok[1]))
        return tok

    def expect(self, token: str) -> None:
        line, col = self.line, self.col
        got = self.next()
        if got[1] != token:
            raise ParseError(line, col, f"expected {token!r}, got {got[1]!r}")

    def ident(self) -> str:
        line, col = self.line, self.col
        kind, tok = self.next()
        if kind != "ident":
            raise ParseError(line, col, f"expected identifier, got {tok!r}")
        return tok

    def number(self) -> float:
        line, col = self.line, self.col
        kind, tok = self.next()
        if kind != "number":
            raise ParseError(line, col, f"expected number, got {tok!r}")
        return float(tok)

    def error(self, message: str) -> ParseError:
        return ParseError(self.line, self.col, message)


def _parse_name_list(tz: _Tokenizer) -> list[str]:
    names = [tz.ident()]
    while tz.peek() == ("punct", ","):
        tz.next()
        names.append(tz.ident())
    return names


def _label(tz: _Tokenizer) -> str:
    """A state label: an identifier or a bare integer like ``0``."""
    line, col = tz.line, tz.col
    kind, tok = tz.next()
    if kind == "ident" or (kind == "number" and _INTEGER.match(tok)):
        return tok
    raise ParseError(line, col, f"expected state label, got {tok!r}")


def _parse_label_list(tz: _Tokenizer) -> list[str]:
    labels = [_label(tz)]
    while tz.peek() == ("punct", ","):
        tz.next()
        labels.append(_label(tz))
    return labels


def _parse_number_list(tz: _Tokenizer) -> list[float]:
    values = [tz.number()]
    while tz.peek() == ("punct", ","):
        tz.next()
        values.append(tz.number())
    return values


def _parse_document(text: str):
    """Parse into (network, mechanisms, informed); mechanisms may be empty."""
    tz = _Tokenizer(text)
    tz.expect("network")
    tz.ident()
    tz.expect("{")
    tz.expect("}")

    variables: list[Variable] = []
    ids: dict[str, int] = {}
    parents: dict[int, tuple[int, ...]] = {}
    cpts: dict[int, np.ndarray] = {}
    mechanisms: dict[int, MechanismSpec] = {}
    informed: frozenset[int] | None = None

    def lookup(name: str) -> int:
        if name not in ids:
            raise tz.error(f"unknown variable {name!r}")
        return ids[name]

    while tz.peek() is not None:
        keyword = tz.ident()
        if keyword == "variable":
            name = tz.ident()
            if name in ids:
                raise tz.error(f"duplicate variable {name!r}")
            tz.expect("{")
            tz.expect("type")
            tz.expect("discrete")
            tz.expect("[")
            k = int(tz.number())
            tz.expect("]")
            tz.expect("{")
            states = _parse_label_list(tz)
            tz.expect("}")
            tz.expect(";")
            tz.expect("}")
            if len(states) != k:
                raise tz.error(
                    f"variable {name!r} declares {k} states but lists {len(states)}"
                )
            ids[name] = len(variables)
            variables.append(Variable(ids[name], name, tuple(states)))
        elif keyword == "probability":
            tz.expect("(")
            child = lookup(tz.ident())
            par: list[int] = []
            if tz.peek() == ("punct", "|"):
                tz.next()
                par = [lookup(n) for n in _parse_name_list(tz)]
            tz.expect(")")
            parents[child] = tuple(par)
            k = variables[child].n_states
            n_cfg = int(np.prod([variables[p].n_states for p in par])) if par else 1
            cpt = np.full((n_cfg, k), np.nan)
            tz.expect("{")
            if not par:
                tz.expect("table")
                values = _parse_number_list(tz)
                tz.expect(";")
                if len(values) != k:
                    raise tz.error(f"expected {k} values in table for {variables[child].name!r}")
                cpt[0] = values
            else:
                while tz.peek() == ("punct", "("):
                    tz.next()
                    labels = _parse_label_list(tz)
                    tz.expect(")")
                    tz.expect(":")
                    values = _parse_number_list(tz)
                    tz.expect(";")
                    if len(labels) != len(par):
                        raise tz.error("parent instantiation arity mismatch")
                    idx = 0
                    for p, label in zip(par, labels):
                        if label not in variables[p].states:
                            raise tz.error(
                                f"{label!r} is not a state of {variables[p].name!r}"
                            )
                        idx = idx * variables[p].n_states + variables[p].states.index(label)
                    if len(values) != k:
                        raise tz.error(f"expected {k} probabilities per row")
                    cpt[idx] = values
            tz.expect("}")
            missing_rows = np.where(np.isnan(cpt).any(axis=1))[0]
            if missing_rows.size:
                inst = _config_labels(variables, par, int(missing_rows[0]))
                raise tz.error(
                    f"missing CPT row for parent instantiation ({inst}) of "
                    f"{variables[child].name!r}"
                )
            cpts[child] = cpt
        elif keyword == "mechanism":
            target = lookup(tz.ident())
            tz.expect("{")
            tz.expect("parents")
            mech_parents: list[int] = []
            if tz.peek() != ("punct", ";"):
                mech_parents = [lookup(n) for n in _parse_name_list(tz)]
            tz.expect(";")
            tz.expect("table")
            values = _parse_number_list(tz)
            tz.expect(";")
            tz.expect("}")
            n_cfg = int(np.prod([variables[p].n_states for p in mech_parents] or [1]))
            if len(values) != 2 * n_cfg:
                raise tz.error(
                    f"mechanism table for {variables[target].name!r} needs "
                    f"{2 * n_cfg} values (ob, unob per parent instantiation)"
                )
            table = np.asarray(values, dtype=float).reshape(n_cfg, 2)
            mechanisms[target] = MechanismSpec(
                tuple(mech_parents), np.ascontiguousarray(table[:, 1])
            )
        elif keyword == "informed":
            tz.expect("{")
            informed = frozenset(lookup(n) for n in _parse_name_list(tz))
            tz.expect("}")
        else:
            raise tz.error(f"unexpected keyword {keyword!r}")

    for v in range(len(variables)):
        if v not in parents:
            raise tz.error(
                f"no probability block for variable {variables[v].name!r}"
            )
    net = BayesianNetwork(
        variables,
        [parents[v] for v in range(len(variables))],
        [cpts[v] for v in range(len(variables))],
    )
    validate(net)
    return net, mechanisms, informed


def _config_labels(variables, parent_ids, cfg_index: int) -> str:
    labels = []
    for p in reversed(parent_ids):
        k = variables[p].n_states
        labels.append(variables[p].states[cfg_index % k])
        cfg_index //= k
    return ", ".join(reversed(labels))


def parse_network(text: str) -> BayesianNetwork:
    """Parse a network document; mechanism/informed blocks are rejected."""
    net, mechanisms, informed = _parse_document(text)
    if mechanisms or informed is not None:
        raise ParseError(1, 1, "document contains missingness blocks; use parse_missingness_graph")
    return net


def parse_missingness_graph(text: str) -> MissingnessGraph:
    net, mechanisms, informed = _parse_document(text)
    return MissingnessGraph(net, mechanisms, informed)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def serialize_network(network: BayesianNetwork, name: str = "net") -> str:
    """Canonical text form: variables in id order, rows in mixed-radix order,
    17 significant digits.  ``parse_network(serialize_network(n))`` is
    structurally equal to ``n``."""
    validate(network)
    out = [f"network {name} {{\n}}\n"]
    for v in network.variables:
        states = ", ".join(v.states)
        out.append(
            f"variable {v.name} {{\n  type discrete [ {v.n_states} ] {{ {states} }};\n}}\n"
        )
    for v in network.variables:
        par = network.parents[v.id]
        cpt = network.cpts[v.id]
        if not par:
            out.append(f"probability ( {v.name} ) {{\n")
            out.append(f"  table {', '.join(_fmt(x) for x in cpt[0])};\n}}\n")
        else:
            names = ", ".join(network.variables[p].name for p in par)
            out.append(f"probability ( {v.name} | {names} ) {{\n")
            configs = all_instantiations([network.variables[p].n_states for p in par])
            for row, cfg in enumerate(configs):
                labels = ", ".join(
                    network.variables[p].states[s] for p, s in zip(par, cfg)
                )
                values = ", ".join(_fmt(x) for x in cpt[row])
                out.append(f"  ({labels}): {values};\n")
            out.append("}\n")
    return "".join(out)


def serialize_missingness_graph(graph: MissingnessGraph, name: str = "net") -> str:
    out = [serialize_network(graph.network, name)]
    net = graph.network
    for target in sorted(graph.mechanisms):
        spec = graph.mechanisms[target]
        names = ", ".join(net.variables[p].name for p in spec.parents)
        pairs = []
        for q in spec.p_unobserved:
            pairs.extend([_fmt(1.0 - q), _fmt(q)])
        out.append(
            f"mechanism {net.variables[target].name} {{\n"
            f"  parents {names};\n  table {', '.join(pairs)};\n}}\n"
        )
    if graph.informed is not None:
        names = ", ".join(net.variables[w].name for w in sorted(graph.informed))
        out.append(f"informed {{ {names} }}\n")
    return "".join(out)


def read_dataset(text: str, network: BayesianNetwork) -> IncompleteDataset:
    """Read a CSV dataset against a network's variables and state labels."""
    global DATASET_READS
    DATASET_READS += 1
    lines = [ln for ln in text.splitlines() if ln.strip() != ""]
    if not lines:
        raise ParseError(1, 1, "empty dataset: header row required")
    header = [h.strip() for h in lines[0].split(",")]
    columns = []
    for name in header:
        columns.append(network.variable_named(name).id)
    if len(set(columns)) != network.n_variables or len(columns) != network.n_variables:
        seen = {network.variables[c].name for c in columns}
        missing = [v.name for v in network.variables if v.name not in seen]
        raise ParseError(1, 1, f"header must list every variable exactly once; missing {missing}")
    state_index = [
        {s: i for i, s in enumerate(v.states)} for v in network.variables
    ]
    rows = np.full((len(lines) - 1, network.n_variables), MISSING, dtype=np.int64)
    for r, line in enumerate(lines[1:]):
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != len(columns):
            raise RaggedRow(r)
        for var_id, cell in zip(columns, cells):
            if cell == "?":
                continue
            try:
                rows[r, var_id] = state_index[var_id][cell]
            except KeyError:
                raise UnknownStateLabel(r, network.variables[var_id].name, cell)
    return IncompleteDataset(network, rows)


def write_dataset(dataset: IncompleteDataset) -> str:
    """CSV text; ``read_dataset(write_dataset(d), d.network)`` equals ``d``."""
    net = dataset.network
    out = [",".join(v.name for v in net.variables)]
    for row in dataset.rows:
        cells = [
            "?" if s == MISSING else net.variables[j].states[s]
            for j, s in enumerate(row)
        ]
        out.append(",".join(cells))
    return "\n".join(out) + "\n"
