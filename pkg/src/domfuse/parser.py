"""Reader and printer for the STRIPS + typing + negative-preconditions subset of PDDL.

Input is lexed as bytes, so offsets in :class:`SourceSpan` are byte offsets
and arbitrary binary input produces a :class:`PDDLError` rather than a
decoding exception. All identifiers are lowercased.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Union

from .core import (
    OBJECT,
    ActionSchema,
    Domain,
    GroundAtom,
    Literal,
    ObjectDecl,
    Plan,
    PlanStep,
    PredicateSchema,
    Problem,
    State,
    TypeDecl,
    check_atom,
)

SUPPORTED_REQUIREMENTS = frozenset({":strips", ":typing", ":negative-preconditions"})
UNSUPPORTED_SECTIONS = frozenset(
    {":constants", ":functions", ":derived", ":durative-action", ":constraints", ":axiom"}
)
UNSUPPORTED_CONNECTIVES = frozenset(
    {
        "or", "imply", "exists", "forall", "when", "=", "preference",
        "increase", "decrease", "assign", "scale-up", "scale-down",
        "either", "<", ">", "<=", ">=",
    }
)


@dataclass(frozen=True)
class SourceSpan:
    start: int
    end: int
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


NO_SPAN = SourceSpan(0, 0, 1, 1)


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    span: SourceSpan
    message: str
    code: str = "SyntaxError"

    def __str__(self) -> str:
        return f"{self.span}: {self.severity}: {self.code}: {self.message}"


@dataclass
class ParseReport:
    outcome: str
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.outcome == "success"

    @property
    def codes(self) -> list[str]:
        return [d.code for d in self.diagnostics if d.severity == "error"]


class PDDLError(Exception):
    code = "PDDLError"

    def __init__(self, message: str, span: SourceSpan | None = None):
        self.message = message
        self.span = span or NO_SPAN
        super().__init__(f"{self.span}: {message}")

    @property
    def diagnostic(self) -> Diagnostic:
        return Diagnostic("error", self.span, self.message, self.code)

    def report(self) -> ParseReport:
        return ParseReport("failure", [self.diagnostic])


class PDDLSyntaxError(PDDLError):
    code = "SyntaxError"


class UnsupportedFeature(PDDLError):
    code = "UnsupportedFeature"


class DuplicateName(PDDLError):
    code = "DuplicateName"


class UnknownType(PDDLError):
    code = "UnknownType"


class UnknownPredicate(PDDLError):
    code = "UnknownPredicate"


class UnknownVariable(PDDLError):
    code = "UnknownVariable"


class UnknownObject(PDDLError):
    code = "UnknownObject"


class ArityMismatch(PDDLError):
    code = "ArityMismatch"


class PDDLTypeError(PDDLError):
    code = "TypeError"


class DomainMismatch(PDDLError):
    code = "DomainMismatch"


class Contradiction(PDDLError):
    code = "Contradiction"


# --------------------------------------------------------------------- lexing

@dataclass(frozen=True)
class Token:
    kind: str  # name | var | keyword | dash | number
    text: str
    span: SourceSpan


@dataclass
class SList:
    items: list
    span: SourceSpan


Node = Union[Token, SList]

_TOKEN_RE = re.compile(
    rb"(?P<ws>[ \t\r\n\f\v]+)"
    rb"|(?P<comment>;[^\n]*)"
    rb"|(?P<lp>\()"
    rb"|(?P<rp>\))"
    rb"|(?P<var>\?[A-Za-z][A-Za-z0-9_\-]*)"
    rb"|(?P<keyword>:[A-Za-z][A-Za-z0-9_\-]*)"
    rb"|(?P<name>[A-Za-z][A-Za-z0-9_\-]*|[=<>+*/]+)"
    rb"|(?P<number>[0-9]+(?:\.[0-9]+)?)"
    rb"|(?P<dash>-)"
)


def _as_bytes(text: str | bytes) -> bytes:
    return text.encode("utf-8") if isinstance(text, str) else bytes(text)


def read_sexprs(text: str | bytes) -> list[Node]:
    """Lex ``text`` and return its top-level s-expressions."""
    data = _as_bytes(text)
    pos, line, line_start = 0, 1, 0
    stack: list[SList] = []
    top: list[Node] = []
    n = len(data)
    while pos < n:
        m = _TOKEN_RE.match(data, pos)
        span = SourceSpan(pos, pos, line, pos - line_start + 1)
        if m is None:
            raise PDDLSyntaxError(f"unexpected character {data[pos:pos + 1]!r}", SourceSpan(pos, pos + 1, line, span.column))
        kind = m.lastgroup
        end = m.end()
        span = SourceSpan(pos, end, line, span.column)
        if kind == "ws":
            chunk = m.group()
            nl = chunk.count(b"\n")
            if nl:
                line += nl
                line_start = pos + chunk.rindex(b"\n") + 1
        elif kind == "comment":
            pass
        elif kind == "lp":
            stack.append(SList([], span))
        elif kind == "rp":
            if not stack:
                raise PDDLSyntaxError("unbalanced ')'", span)
            node = stack.pop()
            node.span = SourceSpan(node.span.start, end, node.span.line, node.span.column)
            (stack[-1].items if stack else top).append(node)
        else:
            tok = Token(kind, m.group().decode("ascii").lower(), span)
            (stack[-1].items if stack else top).append(tok)
        pos = end
    if stack:
        raise PDDLSyntaxError("unbalanced '(': missing ')'", stack[-1].span)
    return top


# ------------------------------------------------------------ tree helpers

def _span(node: Node) -> SourceSpan:
    return node.span


def _is_name(node: Node, value: str | None = None) -> bool:
    return isinstance(node, Token) and node.kind == "name" and (value is None or node.text == value)


def _expect_list(node: Node, what: str) -> SList:
    if not isinstance(node, SList):
        raise PDDLSyntaxError(f"expected {what}, found '{node.text}'", node.span)
    return node


def _expect_name(node: Node, what: str) -> str:
    if not isinstance(node, Token) or node.kind != "name":
        found = node.text if isinstance(node, Token) else "(...)"
        raise PDDLSyntaxError(f"expected {what}, found '{found}'", node.span)
    return node.text


def _single_form(text: str | bytes, what: str) -> SList:
    forms = read_sexprs(text)
    if not forms:
        raise PDDLSyntaxError(f"empty input, expected a {what} definition")
    if len(forms) > 1:
        raise PDDLSyntaxError(f"unexpected content after the {what} definition", _span(forms[1]))
    form = _expect_list(forms[0], f"({what} definition)")
    items = form.items
    if len(items) < 2 or not _is_name(items[0], "define"):
        raise PDDLSyntaxError(f"expected (define ({what} <name>) ...)", form.span)
    header = _expect_list(items[1], f"({what} <name>)")
    if len(header.items) != 2 or not _is_name(header.items[0], what):
        raise PDDLSyntaxError(f"expected ({what} <name>)", header.span)
    return form


def _typed_list(items: list[Node], kind: str, what: str) -> list[tuple[str, str, SourceSpan]]:
    """Parse ``a b - t c`` style lists into (name, type, span) triples."""
    out: list[tuple[str, str, SourceSpan]] = []
    pending: list[tuple[str, SourceSpan]] = []
    i = 0
    while i < len(items):
        node = items[i]
        if isinstance(node, Token) and node.kind == "dash":
            if not pending:
                raise PDDLSyntaxError(f"'-' without preceding {what}", node.span)
            if i + 1 >= len(items):
                raise PDDLSyntaxError("missing type after '-'", node.span)
            tnode = items[i + 1]
            if isinstance(tnode, SList):
                head = tnode.items[0] if tnode.items else None
                if head is not None and _is_name(head, "either"):
                    raise UnsupportedFeature("'either' types are not supported", tnode.span)
                raise PDDLSyntaxError("expected a type name", tnode.span)
            tname = _expect_name(tnode, "type name")
            out.extend((n, tname, s) for n, s in pending)
            pending = []
            i += 2
            continue
        if not isinstance(node, Token) or node.kind != kind:
            found = node.text if isinstance(node, Token) else "(...)"
            raise PDDLSyntaxError(f"expected {what}, found '{found}'", node.span)
        pending.append((node.text, node.span))
        i += 1
    out.extend((n, OBJECT, s) for n, s in pending)
    return out


def _requirements(node: SList) -> set[str]:
    reqs = set()
    for item in node.items[1:]:
        if not isinstance(item, Token) or item.kind != "keyword":
            raise PDDLSyntaxError("expected a requirement flag", item.span)
        if item.text not in SUPPORTED_REQUIREMENTS:
            raise UnsupportedFeature(f"requirement {item.text} is not supported", item.span)
        reqs.add(item.text)
    return reqs


def _flatten_conjunction(node: Node, what: str) -> list[SList]:
    """Return the conjuncts of a (possibly nested) ``and`` as a flat list."""
    out: list[SList] = []
    stack = [node]
    while stack:
        cur = _expect_list(stack.pop(), what)
        if not cur.items:
            continue
        head = cur.items[0]
        if _is_name(head, "and"):
            stack.extend(reversed(cur.items[1:]))
        else:
            out.append(cur)
    return out


def _check_connective(head: Node, node: SList) -> None:
    if isinstance(head, Token) and head.text in UNSUPPORTED_CONNECTIVES:
        raise UnsupportedFeature(f"'{head.text}' is not supported", node.span)


# ---------------------------------------------------------------- domains

class _DomainBuilder:
    def __init__(self, name: str):
        self.name = name
        self.requirements: set[str] = set()
        self.types: dict[str, TypeDecl] = {}
        self.type_spans: dict[str, SourceSpan] = {}
        self.predicates: dict[str, PredicateSchema] = {}
        self.actions: dict[str, ActionSchema] = {}
        self.seen_sections: set[str] = set()

    def known_type(self, name: str) -> bool:
        return name == OBJECT or name in self.types

    def is_subtype(self, sub: str, sup: str) -> bool:
        seen = set()
        while True:
            if sub == sup or sup == OBJECT:
                return True
            if sub == OBJECT or sub in seen:
                return False
            seen.add(sub)
            sub = self.types[sub].parent if sub in self.types else OBJECT

    def add_types(self, node: SList) -> None:
        for name, parent, span in _typed_list(node.items[1:], "name", "type name"):
            if name == OBJECT:
                continue
            if name in self.types:
                raise DuplicateName(f"type {name} declared twice", span)
            self.types[name] = TypeDecl(name, parent)
            self.type_spans[name] = span
        for t in self.types.values():
            if not self.known_type(t.parent):
                raise UnknownType(f"unknown parent type {t.parent}", self.type_spans[t.name])
        for t in self.types.values():
            seen = {t.name}
            cur = t.parent
            while cur != OBJECT:
                if cur in seen:
                    raise PDDLTypeError(f"cyclic type hierarchy through {t.name}", self.type_spans[t.name])
                seen.add(cur)
                cur = self.types[cur].parent

    def params(self, items: list[Node]) -> tuple[tuple[str, str], ...]:
        out = []
        seen = set()
        for var, tname, span in _typed_list(items, "var", "variable"):
            if var in seen:
                raise DuplicateName(f"parameter {var} declared twice", span)
            if not self.known_type(tname):
                raise UnknownType(f"unknown type {tname}", span)
            seen.add(var)
            out.append((var, tname))
        return tuple(out)

    def add_predicates(self, node: SList) -> None:
        for item in node.items[1:]:
            item = _expect_list(item, "predicate declaration")
            if not item.items:
                raise PDDLSyntaxError("empty predicate declaration", item.span)
            name = _expect_name(item.items[0], "predicate name")
            if name in self.predicates:
                raise DuplicateName(f"predicate {name} declared twice", item.span)
            self.predicates[name] = PredicateSchema(name, self.params(item.items[1:]))

    def literal(self, node: SList, params: dict[str, str]) -> Literal:
        head = node.items[0]
        positive = True
        if _is_name(head, "not"):
            if len(node.items) != 2:
                raise PDDLSyntaxError("'not' takes exactly one argument", node.span)
            inner = _expect_list(node.items[1], "atom")
            if not inner.items:
                raise PDDLSyntaxError("empty atom", inner.span)
            _check_connective(inner.items[0], inner)
            if _is_name(inner.items[0], "and") or _is_name(inner.items[0], "not"):
                raise UnsupportedFeature("negation of compound formulas is not supported", node.span)
            node, head, positive = inner, inner.items[0], False
        _check_connective(head, node)
        pname = _expect_name(head, "predicate name")
        pred = self.predicates.get(pname)
        if pred is None:
            raise UnknownPredicate(f"unknown predicate {pname}", node.span)
        args = []
        for arg in node.items[1:]:
            if isinstance(arg, Token) and arg.kind == "name":
                raise UnsupportedFeature(f"constant '{arg.text}' in action (constants are not supported)", arg.span)
            if not isinstance(arg, Token) or arg.kind != "var":
                raise PDDLSyntaxError("expected a variable", arg.span)
            if arg.text not in params:
                raise UnknownVariable(f"undeclared variable {arg.text}", arg.span)
            args.append(arg.text)
        if len(args) != pred.arity:
            raise ArityMismatch(f"{pname} expects {pred.arity} arguments, got {len(args)}", node.span)
        for var, (_, ptype) in zip(args, pred.params):
            if not self.is_subtype(params[var], ptype):
                raise PDDLTypeError(f"{var} of type {params[var]} cannot fill a {ptype} slot of {pname}", node.span)
        return Literal(pname, tuple(args), positive)

    def formula(self, node: Node, params: dict[str, str], what: str) -> frozenset[Literal]:
        lits: set[Literal] = set()
        for conj in _flatten_conjunction(node, what):
            lit = self.literal(conj, params)
            if lit.negate() in lits:
                raise Contradiction(f"{what} contains {lit} and its negation", conj.span)
            lits.add(lit)
        return frozenset(lits)

    def add_action(self, node: SList) -> None:
        items = node.items
        if len(items) < 2:
            raise PDDLSyntaxError("action without a name", node.span)
        name = _expect_name(items[1], "action name")
        if name in self.actions:
            raise DuplicateName(f"action {name} declared twice", node.span)
        fields: dict[str, Node] = {}
        i = 2
        while i < len(items):
            key = items[i]
            if not isinstance(key, Token) or key.kind != "keyword":
                raise PDDLSyntaxError("expected :parameters, :precondition or :effect", key.span)
            if key.text not in (":parameters", ":precondition", ":effect"):
                raise UnsupportedFeature(f"action field {key.text} is not supported", key.span)
            if key.text in fields:
                raise PDDLSyntaxError(f"duplicate {key.text}", key.span)
            if i + 1 >= len(items):
                raise PDDLSyntaxError(f"missing value for {key.text}", key.span)
            fields[key.text] = items[i + 1]
            i += 2
        params: tuple[tuple[str, str], ...] = ()
        if ":parameters" in fields:
            params = self.params(_expect_list(fields[":parameters"], "parameter list").items)
        ptypes = dict(params)
        pre = frozenset()
        if ":precondition" in fields:
            pre = self.formula(fields[":precondition"], ptypes, "precondition")
        eff = frozenset()
        if ":effect" in fields:
            eff = self.formula(fields[":effect"], ptypes, "effect")
        self.actions[name] = ActionSchema(name, params, pre, eff)

    def build(self) -> Domain:
        domain = Domain(
            self.name,
            frozenset(self.requirements),
            tuple(self.types.values()),
            tuple(self.predicates.values()),
            tuple(self.actions.values()),
        )
        return with_required_flags(domain)


def _guard(fn):
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except RecursionError:
            raise PDDLSyntaxError("input nested too deeply") from None
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_guard
def parse_domain(text: str | bytes) -> Domain:
    """Parse a domain file. Raises a :class:`PDDLError` subclass on failure."""
    form = _single_form(text, "domain")
    name = _expect_name(form.items[1].items[1], "domain name")
    b = _DomainBuilder(name)
    order = {":requirements": 0, ":types": 1, ":predicates": 2, ":action": 3}
    sections = []
    for item in form.items[2:]:
        sec = _expect_list(item, "domain section")
        head = sec.items[0] if sec.items else None
        if not isinstance(head, Token) or head.kind != "keyword":
            raise PDDLSyntaxError("expected a section keyword", sec.span)
        if head.text in UNSUPPORTED_SECTIONS:
            raise UnsupportedFeature(f"section {head.text} is not supported", sec.span)
        if head.text not in order:
            raise PDDLSyntaxError(f"unknown section {head.text}", sec.span)
        if head.text != ":action":
            if head.text in b.seen_sections:
                raise PDDLSyntaxError(f"duplicate section {head.text}", sec.span)
            b.seen_sections.add(head.text)
        sections.append((order[head.text], sec))
    # types and predicates are needed before actions regardless of source order
    for _, sec in sorted(sections, key=lambda s: s[0]):
        head = sec.items[0].text
        if head == ":requirements":
            b.requirements = _requirements(sec)
        elif head == ":types":
            b.add_types(sec)
        elif head == ":predicates":
            b.add_predicates(sec)
        else:
            b.add_action(sec)
    return b.build()


def _ground_atom(node: SList, domain: Domain, object_type: dict[str, str], what: str) -> GroundAtom:
    if not node.items:
        raise PDDLSyntaxError("empty atom", node.span)
    head = node.items[0]
    if _is_name(head, "not"):
        raise UnsupportedFeature(f"negative literals are not supported in {what}", node.span)
    _check_connective(head, node)
    pname = _expect_name(head, "predicate name")
    pred = domain.predicate_map.get(pname)
    if pred is None:
        raise UnknownPredicate(f"unknown predicate {pname}", node.span)
    args = tuple(_expect_name(a, "object name") for a in node.items[1:])
    if len(args) != pred.arity:
        raise ArityMismatch(f"{pname} expects {pred.arity} arguments, got {len(args)}", node.span)
    for a, arg_node in zip(args, node.items[1:]):
        if a not in object_type:
            raise UnknownObject(f"undeclared object {a}", arg_node.span)
    atom = GroundAtom(pname, args)
    reason = check_atom(domain, object_type, atom)
    if reason is not None:
        raise PDDLTypeError(reason, node.span)
    return atom


@_guard
def parse_problem(text: str | bytes, domain: Domain) -> Problem:
    """Parse a problem file and type-check it against ``domain``."""
    form = _single_form(text, "problem")
    name = _expect_name(form.items[1].items[1], "problem name")
    secs: dict[str, SList] = {}
    for item in form.items[2:]:
        sec = _expect_list(item, "problem section")
        head = sec.items[0] if sec.items else None
        if not isinstance(head, Token) or head.kind != "keyword":
            raise PDDLSyntaxError("expected a section keyword", sec.span)
        if head.text in (":metric", ":constraints"):
            raise UnsupportedFeature(f"section {head.text} is not supported", sec.span)
        if head.text not in (":domain", ":requirements", ":objects", ":init", ":goal"):
            raise PDDLSyntaxError(f"unknown section {head.text}", sec.span)
        if head.text in secs:
            raise PDDLSyntaxError(f"duplicate section {head.text}", sec.span)
        secs[head.text] = sec
    if ":domain" not in secs:
        raise PDDLSyntaxError("missing (:domain ...)", form.span)
    dsec = secs[":domain"]
    if len(dsec.items) != 2:
        raise PDDLSyntaxError("expected (:domain <name>)", dsec.span)
    dname = _expect_name(dsec.items[1], "domain name")
    if dname != domain.name:
        raise DomainMismatch(f"problem is for domain {dname}, not {domain.name}", dsec.span)
    if ":requirements" in secs:
        _requirements(secs[":requirements"])
    objects: list[ObjectDecl] = []
    object_type: dict[str, str] = {}
    if ":objects" in secs:
        for oname, tname, span in _typed_list(secs[":objects"].items[1:], "name", "object name"):
            if oname in object_type:
                raise DuplicateName(f"object {oname} declared twice", span)
            if not domain.has_type(tname):
                raise UnknownType(f"unknown type {tname}", span)
            object_type[oname] = tname
            objects.append(ObjectDecl(oname, tname))
    init = set()
    if ":init" in secs:
        for item in secs[":init"].items[1:]:
            init.add(_ground_atom(_expect_list(item, "init atom"), domain, object_type, "the initial state"))
    if ":goal" not in secs:
        raise PDDLSyntaxError("missing (:goal ...)", form.span)
    gsec = secs[":goal"]
    if len(gsec.items) != 2:
        raise PDDLSyntaxError("expected (:goal <formula>)", gsec.span)
    goal = set()
    for conj in _flatten_conjunction(gsec.items[1], "goal"):
        goal.add(_ground_atom(conj, domain, object_type, "goals"))
    return Problem(name, domain.name, tuple(objects), State(frozenset(init)), frozenset(goal))


@_guard
def parse_plan(text: str | bytes) -> Plan:
    """Parse a plan file: one ``(action obj ...)`` per step, ``;`` comments allowed."""
    steps = []
    for form in read_sexprs(text):
        if not isinstance(form, SList) or not form.items:
            raise PDDLSyntaxError("expected (action-name obj ...)", form.span)
        names = []
        for item in form.items:
            if not isinstance(item, Token) or item.kind != "name":
                raise PDDLSyntaxError("plan steps may only contain names", item.span)
            names.append(item.text)
        steps.append(PlanStep(names[0], tuple(names[1:])))
    return Plan(tuple(steps))


def report_for(fn, *args) -> tuple[object | None, ParseReport]:
    """Run a parse function, returning (value, report) instead of raising."""
    try:
        value = fn(*args)
    except PDDLError as exc:
        return None, exc.report()
    return value, ParseReport("success")


# ---------------------------------------------------------------- printing

def required_flags(domain: Domain) -> frozenset[str]:
    flags = {":strips"}
    if domain.types or any(t != OBJECT for p in domain.predicates for _, t in p.params):
        flags.add(":typing")
    if any(not lit.positive for a in domain.actions for lit in a.preconditions):
        flags.add(":negative-preconditions")
    return frozenset(flags)


def with_required_flags(domain: Domain) -> Domain:
    flags = domain.requirements | required_flags(domain)
    if flags == domain.requirements:
        return domain
    return Domain(domain.name, flags, domain.types, domain.predicates, domain.actions)


def _params(params: Iterable[tuple[str, str]]) -> str:
    return " ".join(f"{v} - {t}" for v, t in params)


def _conjunction(lits, indent: str) -> list[str]:
    if not lits:
        return ["(and)"]
    return ["(and"] + [f"{indent}  {lit}" for lit in sorted(lits)] + [f"{indent})"]


def print_domain(domain: Domain) -> str:
    reqs = sorted(domain.requirements | required_flags(domain))
    out = [f"(define (domain {domain.name})", f"  (:requirements {' '.join(reqs)})"]
    if domain.types:
        out.append("  (:types")
        out.extend(f"    {t.name} - {t.parent}" for t in sorted(domain.types))
        out.append("  )")
    out.append("  (:predicates")
    for p in sorted(domain.predicates):
        inner = " ".join(filter(None, [p.name, _params(p.params)]))
        out.append(f"    ({inner})")
    out.append("  )")
    for a in sorted(domain.actions, key=lambda a: a.name):
        out.append(f"  (:action {a.name}")
        out.append(f"    :parameters ({_params(a.params)})")
        pre = _conjunction(a.preconditions, "    ")
        out.append(f"    :precondition {pre[0]}")
        out.extend(pre[1:])
        eff = _conjunction(a.effects, "    ")
        out.append(f"    :effect {eff[0]}")
        out.extend(eff[1:])
        out.append("  )")
    out.append(")")
    return "\n".join(out) + "\n"


def print_problem(problem: Problem) -> str:
    out = [
        f"(define (problem {problem.name})",
        f"  (:domain {problem.domain_name})",
        "  (:objects",
    ]
    out.extend(f"    {o.name} - {o.type}" for o in sorted(problem.objects))
    out.append("  )")
    out.append("  (:init")
    out.extend(f"    {a}" for a in sorted(problem.init.atoms))
    out.append("  )")
    if problem.goal:
        out.append("  (:goal (and")
        out.extend(f"    {a}" for a in sorted(problem.goal))
        out.append("  ))")
    else:
        out.append("  (:goal (and))")
    out.append(")")
    return "\n".join(out) + "\n"


def print_plan(plan: Plan) -> str:
    return "".join(f"{step}\n" for step in plan.steps)
