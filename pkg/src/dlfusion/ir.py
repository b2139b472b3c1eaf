"""Loop-nest IR and the `.dlf` textual front end.

The IR is a forest of counted loops over integer arrays.  Memory operations
are first-class statements with stable ids assigned in textual (pre-order)
program order; that id order is the topological order used by every later
analysis.  All nodes are immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

# ---------------------------------------------------------------------------
# expressions

@dataclass(frozen=True)
class Num:
    value: int

@dataclass(frozen=True)
class Var:
    name: str

@dataclass(frozen=True)
class Load:
    """A load used inside an expression.  Restricted to readonly arrays."""
    array: str
    addr: "Expr"

@dataclass(frozen=True)
class Bin:
    op: str  # + - * < <= > >= == !=
    lhs: "Expr"
    rhs: "Expr"

Expr = Num | Var | Load | Bin

ARITH_OPS = ("+", "-", "*")
CMP_OPS = ("<", "<=", ">", ">=", "==", "!=")


def expr_vars(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Bin):
        return expr_vars(e.lhs) | expr_vars(e.rhs)
    if isinstance(e, Load):
        return expr_vars(e.addr)
    return set()


def expr_loads(e: Expr) -> list[Load]:
    if isinstance(e, Load):
        return [e] + expr_loads(e.addr)
    if isinstance(e, Bin):
        return expr_loads(e.lhs) + expr_loads(e.rhs)
    return []


# ---------------------------------------------------------------------------
# declarations and statements

@dataclass(frozen=True)
class SymbolDecl:
    name: str
    max_value: int

@dataclass(frozen=True)
class ArrayDecl:
    name: str
    length: int
    init: int | tuple[int, ...] = 0
    readonly: bool = False

    def initial_words(self) -> list[int]:
        if isinstance(self.init, tuple):
            words = list(self.init) + [0] * (self.length - len(self.init))
            return words[: self.length]
        return [self.init] * self.length


@dataclass(frozen=True)
class ScalarRec:
    """Per-loop scalar recurrence: `x: init E, step (+c | *c | E);`

    `kind` is "+" or "*" for the analyzable forms, "expr" for a general
    update, which is legal but unanalyzable for monotonicity purposes.
    The variable is re-initialized on loop entry and updated at the end
    of each iteration; its final value stays visible after the loop.
    """
    name: str
    init: Expr
    kind: str           # "+", "*", "expr"
    amount: int = 0     # for "+"/"*"
    update: Expr | None = None  # for "expr"


@dataclass(frozen=True)
class MemOp:
    id: int
    kind: str           # "load" | "store"
    array: str
    addr: Expr
    value: Expr | None = None       # stores only
    let_name: str | None = None     # loads only
    # monotonicity assertion: None, "all", or a frozenset of loop depths
    annotation: str | frozenset | None = None
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)

    @property
    def is_store(self) -> bool:
        return self.kind == "store"


@dataclass(frozen=True)
class Assign:
    name: str
    expr: Expr
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)

@dataclass(frozen=True)
class If:
    cond: Expr
    then: tuple = ()
    els: tuple = ()
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)

@dataclass(frozen=True)
class Loop:
    index: str
    lo: Expr
    hi: Expr
    recs: tuple[ScalarRec, ...] = ()
    body: tuple = ()
    depth: int = 1      # 1-based nesting level
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)

    def children(self) -> list["Loop"]:
        return [s for s in self.body if isinstance(s, Loop)]

Stmt = MemOp | Assign | If | Loop


@dataclass(frozen=True)
class Program:
    symbols: tuple[SymbolDecl, ...] = ()
    arrays: tuple[ArrayDecl, ...] = ()
    body: tuple = ()    # top-level Assigns and Loops, in order

    @property
    def forest(self) -> list[Loop]:
        return [s for s in self.body if isinstance(s, Loop)]

    def symbol(self, name):
        return next(s for s in self.symbols if s.name == name)

    def array(self, name):
        return next(a for a in self.arrays if a.name == name)

    def mem_ops(self) -> list[MemOp]:
        out = []
        def walk(stmts):
            for s in stmts:
                if isinstance(s, MemOp):
                    out.append(s)
                elif isinstance(s, If):
                    walk(s.then)
                    walk(s.els)
                elif isinstance(s, Loop):
                    walk(s.body)
        walk(self.body)
        return out

    def op(self, op_id: int) -> MemOp:
        return next(o for o in self.mem_ops() if o.id == op_id)

    def loops_of(self, op_id: int) -> list[Loop]:
        """Enclosing loop chain of a memop, outermost first."""
        def walk(stmts, chain):
            for s in stmts:
                if isinstance(s, MemOp) and s.id == op_id:
                    return chain
                if isinstance(s, If):
                    r = walk(s.then, chain) or walk(s.els, chain)
                    if r is not None:
                        return r
                if isinstance(s, Loop):
                    r = walk(s.body, chain + [s])
                    if r is not None:
                        return r
            return None
        chain = walk(self.body, [])
        if chain is None:
            raise KeyError(f"no memop with id {op_id}")
        return chain


def topo_order(p: Program) -> list[int]:
    """MemOp ids in textual/pre-order program order."""
    return [op.id for op in p.mem_ops()]


# ---------------------------------------------------------------------------
# diagnostics

@dataclass(frozen=True)
class Diagnostic:
    line: int
    col: int
    message: str
    path: str = "<dlf>"

    def __str__(self):
        return f"{self.path}:{self.line}:{self.col}: {self.message}"


class DslError(Exception):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


# ---------------------------------------------------------------------------
# tokenizer

KEYWORDS = {"param", "mem", "init", "readonly", "loop", "let", "load",
            "store", "if", "else", "monotonic", "max", "step"}

_PUNCT = ("..", "<=", ">=", "==", "!=", "{", "}", "(", ")", "[", "]",
          ";", ",", ":", "=", "<", ">", "+", "-", "*", "@")


def tokenize(text: str, path: str = "<dlf>"):
    toks = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1; line += 1; col = 1
            continue
        if c in " \t\r":
            i += 1; col += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(("num", int(text[i:j]), line, col))
            col += j - i; i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            toks.append(("kw" if word in KEYWORDS else "id", word, line, col))
            col += j - i; i = j
            continue
        for p in _PUNCT:
            if text.startswith(p, i):
                toks.append(("punct", p, line, col))
                col += len(p); i += len(p)
                break
        else:
            raise DslError([Diagnostic(line, col, f"unexpected character {c!r}", path)])
    toks.append(("eof", None, line, col))
    return toks


# ---------------------------------------------------------------------------
# parser

class _Parser:
    def __init__(self, text, path):
        self.toks = tokenize(text, path)
        self.pos = 0
        self.path = path
        self.next_op_id = 0

    def peek(self):
        return self.toks[self.pos]

    def advance(self):
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def fail(self, msg):
        kind, val, line, col = self.peek()
        raise DslError([Diagnostic(line, col, msg, self.path)])

    def expect(self, kind, val=None):
        t = self.peek()
        if t[0] != kind or (val is not None and t[1] != val):
            want = val if val is not None else kind
            got = t[1] if t[1] is not None else "end of input"
            self.fail(f"expected {want!r}, got {got!r}")
        return self.advance()

    def accept(self, kind, val=None):
        t = self.peek()
        if t[0] == kind and (val is None or t[1] == val):
            return self.advance()
        return None

    # -- expressions (precedence: cmp < add < mul < atom)

    def expr(self):
        lhs = self.add()
        t = self.peek()
        if t[0] == "punct" and t[1] in CMP_OPS:
            self.advance()
            return Bin(t[1], lhs, self.add())
        return lhs

    def add(self):
        e = self.mul()
        while True:
            t = self.peek()
            if t[0] == "punct" and t[1] in ("+", "-"):
                self.advance()
                e = Bin(t[1], e, self.mul())
            else:
                return e

    def mul(self):
        e = self.atom()
        while self.accept("punct", "*"):
            e = Bin("*", e, self.atom())
        return e

    def atom(self):
        t = self.peek()
        if t[0] == "num":
            self.advance()
            return Num(t[1])
        if t[0] == "id":
            self.advance()
            return Var(t[1])
        if t[0] == "kw" and t[1] == "load":
            self.advance()
            name = self.expect("id")[1]
            self.expect("punct", "[")
            addr = self.expr()
            self.expect("punct", "]")
            return Load(name, addr)
        if self.accept("punct", "("):
            e = self.expr()
            self.expect("punct", ")")
            return e
        if self.accept("punct", "-"):
            return Bin("-", Num(0), self.atom())
        self.fail(f"expected expression, got {t[1]!r}")

    # -- statements

    def annotation(self):
        if self.accept("kw", "monotonic"):
            depths = set()
            while self.accept("punct", "@"):
                depths.add(self.expect("num")[1])
            return frozenset(depths) if depths else "all"
        return None

    def statement(self, depth):
        kind, val, line, col = self.peek()
        if kind == "kw" and val == "loop":
            return self.loop(depth)
        if kind == "kw" and val == "if":
            self.advance()
            self.expect("punct", "(")
            cond = self.expr()
            self.expect("punct", ")")
            self.expect("punct", "{")
            then = self.stmt_list(depth)
            self.expect("punct", "}")
            els = ()
            if self.accept("kw", "else"):
                self.expect("punct", "{")
                els = self.stmt_list(depth)
                self.expect("punct", "}")
            return If(cond, then, els, line, col)
        if kind == "kw" and val == "store":
            self.advance()
            arr = self.expect("id")[1]
            self.expect("punct", "[")
            addr = self.expr()
            self.expect("punct", "]")
            self.expect("punct", "=")
            value = self.expr()
            ann = self.annotation()
            self.expect("punct", ";")
            op = MemOp(self.next_op_id, "store", arr, addr, value=value,
                       annotation=ann, line=line, col=col)
            self.next_op_id += 1
            return op
        if kind == "kw" and val in ("let", "load"):
            let_name = None
            if val == "let":
                self.advance()
                let_name = self.expect("id")[1]
                self.expect("punct", "=")
            self.expect("kw", "load")
            arr = self.expect("id")[1]
            self.expect("punct", "[")
            addr = self.expr()
            self.expect("punct", "]")
            ann = self.annotation()
            self.expect("punct", ";")
            op = MemOp(self.next_op_id, "load", arr, addr, let_name=let_name,
                       annotation=ann, line=line, col=col)
            self.next_op_id += 1
            return op
        if kind == "id":
            self.advance()
            self.expect("punct", "=")
            e = self.expr()
            self.expect("punct", ";")
            return Assign(val, e, line, col)
        self.fail(f"expected statement, got {val!r}")

    def stmt_list(self, depth):
        out = []
        while True:
            t = self.peek()
            if t[0] == "punct" and t[1] == "}" or t[0] == "eof":
                return tuple(out)
            out.append(self.statement(depth))

    def loop(self, depth):
        _, _, line, col = self.expect("kw", "loop")
        index = self.expect("id")[1]
        self.expect("punct", "=")
        lo = self.expr()
        self.expect("punct", "..")
        hi = self.expr()
        self.expect("punct", "{")
        recs = []
        # scalar recurrence declarations come first:  x: init E, step ...;
        while self.peek()[0] == "id" and self.toks[self.pos + 1][:2] == ("punct", ":"):
            name = self.advance()[1]
            self.advance()  # ':'
            self.expect("kw", "init")
            init = self.expr()
            self.expect("punct", ",")
            self.expect("kw", "step")
            t = self.peek()
            if t[0] == "punct" and t[1] in ("+", "*") and self.toks[self.pos + 1][0] == "num":
                op = self.advance()[1]
                amount = self.expect("num")[1]
                recs.append(ScalarRec(name, init, op, amount))
            else:
                recs.append(ScalarRec(name, init, "expr", update=self.expr()))
            self.expect("punct", ";")
        body = self.stmt_list(depth + 1)
        self.expect("punct", "}")
        return Loop(index, lo, hi, tuple(recs), body, depth, line, col)

    def program(self):
        symbols, arrays, body = [], [], []
        while self.peek()[0] != "eof":
            kind, val, line, col = self.peek()
            if kind == "kw" and val == "param":
                self.advance()
                name = self.expect("id")[1]
                self.expect("kw", "max")
                mx = self.expect("num")[1]
                self.expect("punct", ";")
                symbols.append(SymbolDecl(name, mx))
            elif kind == "kw" and val == "mem":
                self.advance()
                name = self.expect("id")[1]
                self.expect("punct", "[")
                length = self.expect("num")[1]
                self.expect("punct", "]")
                init = 0
                if self.accept("kw", "init"):
                    if self.accept("punct", "["):
                        vals = [self.expect("num")[1]]
                        while self.accept("punct", ","):
                            vals.append(self.expect("num")[1])
                        self.expect("punct", "]")
                        init = tuple(vals)
                    else:
                        init = self.expect("num")[1]
                ro = bool(self.accept("kw", "readonly"))
                self.expect("punct", ";")
                arrays.append(ArrayDecl(name, length, init, ro))
            else:
                body.append(self.statement(0))
        return Program(tuple(symbols), tuple(arrays), tuple(body))


def parse(text: str, path: str = "<dlf>", check: bool = True) -> Program:
    """Parse DSL source into a Program; raises DslError on any diagnostic."""
    p = _Parser(text, path).program()
    if check:
        diags = validate(p, path)
        if diags:
            raise DslError(diags)
    return p


# ---------------------------------------------------------------------------
# validation

def validate(p: Program, path: str = "<dlf>") -> list[Diagnostic]:
    diags = []
    def err(node, msg):
        line = getattr(node, "line", 0)
        col = getattr(node, "col", 0)
        diags.append(Diagnostic(line, col, msg, path))

    seen = set()
    for s in p.symbols:
        if s.name in seen:
            err(s, f"duplicate declaration of {s.name!r}")
        seen.add(s.name)
        if s.max_value < 1:
            err(s, f"param {s.name!r} must have max >= 1")
    for a in p.arrays:
        if a.name in seen:
            err(a, f"duplicate declaration of {a.name!r}")
        seen.add(a.name)
        if a.length < 1:
            err(a, f"array {a.name!r} must have length >= 1")

    arrays = {a.name: a for a in p.arrays}
    symbols = {s.name for s in p.symbols}

    # memop ids strictly increasing in pre-order
    ids = topo_order(p)
    if any(b <= a for a, b in zip(ids, ids[1:])):
        diags.append(Diagnostic(0, 0, "memop ids are not strictly increasing "
                                "in program order", path))

    # scope/taint walk.  env: var -> tainted (derived from a protected load)
    def check_expr(e, env, node, where):
        # where: "addr" | "bound" | "value"
        if isinstance(e, Num):
            return False
        if isinstance(e, Var):
            if e.name in symbols:
                return False
            if e.name not in env:
                err(node, f"undeclared identifier {e.name!r}")
                return False
            if env[e.name] and where in ("addr", "bound"):
                err(node, f"{e.name!r} depends on a protected load and cannot "
                          f"be used in an address or loop bound")
            return env[e.name]
        if isinstance(e, Load):
            if e.array not in arrays:
                err(node, f"undeclared array {e.array!r}")
            elif not arrays[e.array].readonly:
                err(node, f"inline load of non-readonly array {e.array!r}; "
                          f"use a `let` load statement")
            check_expr(e.addr, env, node, "addr")
            return False
        if isinstance(e, Bin):
            t1 = check_expr(e.lhs, env, node, where)
            t2 = check_expr(e.rhs, env, node, where)
            return t1 or t2

    def walk(stmts, env, in_if):
        env = dict(env)
        for s in stmts:
            if isinstance(s, Assign):
                t = check_expr(s.expr, env, s, "value")
                env[s.name] = t or in_if
            elif isinstance(s, MemOp):
                if s.array not in arrays:
                    err(s, f"undeclared array {s.array!r}")
                else:
                    if s.is_store and arrays[s.array].readonly:
                        err(s, f"store to readonly array {s.array!r}")
                check_expr(s.addr, env, s, "addr")
                if s.value is not None:
                    check_expr(s.value, env, s, "value")
                if s.let_name:
                    ro = s.array in arrays and arrays[s.array].readonly
                    env[s.let_name] = not ro
            elif isinstance(s, If):
                check_expr(s.cond, env, s, "value")
                walk(s.then, env, True)
                walk(s.els, env, True)
            elif isinstance(s, Loop):
                check_expr(s.lo, env, s, "bound")
                check_expr(s.hi, env, s, "bound")
                inner = dict(env)
                inner[s.index] = False
                for r in s.recs:
                    t = check_expr(r.init, inner, s, "value")
                    inner[r.name] = t
                # recurrence updates see the body scope of a full iteration
                body_env = walk(s.body, inner, in_if)
                for r in s.recs:
                    if r.kind == "expr":
                        t = check_expr(r.update, body_env, s, "value")
                        if t:
                            inner[r.name] = True
                # after the loop, recurrence finals stay visible
                for r in s.recs:
                    env[r.name] = inner[r.name]
        return env

    walk(p.body, {}, False)
    return diags


# ---------------------------------------------------------------------------
# pretty printer

def print_expr(e: Expr) -> str:
    if isinstance(e, Num):
        return str(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Load):
        return f"load {e.array}[{print_expr(e.addr)}]"
    if isinstance(e, Bin):
        return f"({print_expr(e.lhs)} {e.op} {print_expr(e.rhs)})"
    raise TypeError(e)


def _print_annotation(ann):
    if ann is None:
        return ""
    if ann == "all":
        return " monotonic"
    return " monotonic" + "".join(f" @{d}" for d in sorted(ann))


def print_program(p: Program) -> str:
    lines = []
    for s in p.symbols:
        lines.append(f"param {s.name} max {s.max_value};")
    for a in p.arrays:
        init = ""
        if isinstance(a.init, tuple):
            init = " init [" + ", ".join(map(str, a.init)) + "]"
        elif a.init != 0:
            init = f" init {a.init}"
        ro = " readonly" if a.readonly else ""
        lines.append(f"mem {a.name}[{a.length}]{init}{ro};")

    def emit(stmts, ind):
        pad = "    " * ind
        for s in stmts:
            if isinstance(s, Assign):
                lines.append(f"{pad}{s.name} = {print_expr(s.expr)};")
            elif isinstance(s, MemOp):
                ann = _print_annotation(s.annotation)
                if s.kind == "load":
                    let = f"let {s.let_name} = " if s.let_name else ""
                    lines.append(f"{pad}{let}load {s.array}[{print_expr(s.addr)}]{ann};")
                else:
                    lines.append(f"{pad}store {s.array}[{print_expr(s.addr)}] = "
                                 f"{print_expr(s.value)}{ann};")
            elif isinstance(s, If):
                lines.append(f"{pad}if ({print_expr(s.cond)}) {{")
                emit(s.then, ind + 1)
                if s.els:
                    lines.append(f"{pad}}} else {{")
                    emit(s.els, ind + 1)
                lines.append(f"{pad}}}")
            elif isinstance(s, Loop):
                lines.append(f"{pad}loop {s.index} = {print_expr(s.lo)}"
                             f"..{print_expr(s.hi)} {{")
                for r in s.recs:
                    if r.kind == "expr":
                        step = print_expr(r.update)
                    else:
                        step = f"{r.kind}{r.amount}"
                    lines.append(f"{pad}    {r.name}: init {print_expr(r.init)}, "
                                 f"step {step};")
                emit(s.body, ind + 1)
                lines.append(f"{pad}}}")
    emit(p.body, 0)
    return "\n".join(lines) + "\n"
