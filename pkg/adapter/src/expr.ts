/**
 * Expression support for the harness grammar (see the harness package's
 * data/GRAMMAR.ebnf).  The adapter needs three things: parse incoming
 * expression strings (the planted target, validation in tests), evaluate
 * candidates on the training data to report honest losses, and print
 * candidate trees back into the exact surface syntax the harness accepts.
 */

export type Expression =
  | { kind: "const"; value: number }
  | { kind: "var"; index: number }
  | { kind: "apply"; op: string; args: Expression[] };

export const BINARY_OPS = new Set(["+", "-", "*", "/", "^"]);
export const UNARY_FUNCTIONS = new Set([
  "neg", "exp", "log", "sqrt", "sin", "cos", "tanh",
]);

export class ParseError extends Error {
  constructor(message: string, readonly offset: number) {
    super(`${message} (at offset ${offset})`);
  }
}

export function constant(value: number): Expression {
  if (!Number.isFinite(value)) {
    throw new Error(`constants must be finite, got ${value}`);
  }
  return { kind: "const", value: value === 0 ? 0 : value };
}

export function variable(index: number): Expression {
  if (!Number.isInteger(index) || index < 1) {
    throw new Error(`variable index must be a positive integer, got ${index}`);
  }
  return { kind: "var", index };
}

export function apply(op: string, ...args: Expression[]): Expression {
  if (op === "pow2") return { kind: "apply", op: "^", args: [args[0], constant(2)] };
  if (op === "pow3") return { kind: "apply", op: "^", args: [args[0], constant(3)] };
  const arity = BINARY_OPS.has(op) ? 2 : UNARY_FUNCTIONS.has(op) ? 1 : -1;
  if (arity === -1) throw new Error(`unknown operator ${op}`);
  if (args.length !== arity) {
    throw new Error(`${op} takes ${arity} argument(s), got ${args.length}`);
  }
  return { kind: "apply", op, args };
}

// ---------------------------------------------------------------------------
// parsing: recursive descent with standard precedence
// ---------------------------------------------------------------------------

class Parser {
  pos = 0;

  constructor(readonly text: string) {}

  fail(message: string, offset?: number): never {
    throw new ParseError(message, offset ?? this.pos);
  }

  skipWs(): void {
    while (this.pos < this.text.length && /\s/.test(this.text[this.pos])) this.pos++;
  }

  peek(): string {
    this.skipWs();
    return this.pos < this.text.length ? this.text[this.pos] : "";
  }

  expect(ch: string): void {
    if (this.peek() !== ch) this.fail(`expected '${ch}'`);
    this.pos++;
  }

  parse(): Expression {
    if (!this.text.trim()) this.fail("empty expression");
    const node = this.additive();
    this.skipWs();
    if (this.pos !== this.text.length) this.fail("trailing input");
    return node;
  }

  additive(): Expression {
    let node = this.multiplicative();
    for (;;) {
      const ch = this.peek();
      if (ch === "+" || ch === "-") {
        this.pos++;
        const rhs = this.multiplicative();
        node = { kind: "apply", op: ch === "+" ? "+" : "-", args: [node, rhs] };
      } else {
        return node;
      }
    }
  }

  multiplicative(): Expression {
    let node = this.unary();
    for (;;) {
      const ch = this.peek();
      if (ch === "*" || ch === "/") {
        this.pos++;
        node = { kind: "apply", op: ch, args: [node, this.unary()] };
      } else {
        return node;
      }
    }
  }

  unary(): Expression {
    if (this.peek() === "-") {
      this.pos++;
      this.skipWs();
      // '-' directly before a literal folds into the constant
      if (/\d/.test(this.text[this.pos] ?? "")) {
        return constant(-this.number());
      }
      return { kind: "apply", op: "neg", args: [this.unary()] };
    }
    return this.power();
  }

  power(): Expression {
    const base = this.atom();
    if (this.peek() === "^") {
      this.pos++;
      return { kind: "apply", op: "^", args: [base, this.unary()] };
    }
    return base;
  }

  atom(): Expression {
    const ch = this.peek();
    if (ch === "(") {
      this.pos++;
      const node = this.additive();
      this.expect(")");
      return node;
    }
    if (/\d/.test(ch)) return constant(this.number());
    if (/[a-z_]/i.test(ch)) return this.identifier();
    if (ch === "") this.fail("unexpected end of input");
    this.fail(`unexpected character '${ch}'`);
  }

  number(): number {
    const match = /^\d+(?:\.\d*)?(?:[eE][+-]?\d+)?/.exec(this.text.slice(this.pos));
    if (!match) this.fail("malformed number");
    const start = this.pos;
    this.pos += match[0].length;
    const value = Number(match[0]);
    if (!Number.isFinite(value)) this.fail("constant overflows float64", start);
    return value;
  }

  identifier(): Expression {
    const match = /^[A-Za-z_][A-Za-z_0-9]*/.exec(this.text.slice(this.pos));
    if (!match) this.fail("malformed identifier");
    const name = match[0];
    const start = this.pos;
    this.pos += name.length;
    if (/^v\d+$/.test(name)) {
      const index = Number(name.slice(1));
      if (index < 1) this.fail("variable indices start at v1", start);
      return variable(index);
    }
    if (UNARY_FUNCTIONS.has(name) || name === "pow2" || name === "pow3") {
      this.expect("(");
      const argument = this.additive();
      this.expect(")");
      return apply(name, argument);
    }
    this.fail(`unknown identifier '${name}'`, start);
  }
}

export function parse(text: string): Expression {
  return new Parser(text).parse();
}

// ---------------------------------------------------------------------------
// printing
// ---------------------------------------------------------------------------

/** Shortest decimal-or-scientific rendering that round-trips. */
export function formatConstant(value: number): string {
  if (value === 0) return "0";
  const sign = value < 0 ? "-" : "";
  const magnitude = Math.abs(value);
  // toString() already yields shortest round-trip digits in JS
  const plainDigits = shortestDigits(magnitude);
  const plain = plainDigits.plain;
  const sci = plainDigits.scientific;
  if (plain.length < sci.length) return sign + plain;
  if (sci.length < plain.length) return sign + sci;
  return sign + (Math.abs(plainDigits.adjusted) >= 5 ? sci : plain);
}

function shortestDigits(magnitude: number): {
  plain: string;
  scientific: string;
  adjusted: number;
} {
  const repr = magnitude.toString();
  let digits: string;
  let exponent: number;
  const sciMatch = /^(\d)(?:\.(\d+))?e([+-]\d+)$/.exec(repr);
  if (sciMatch) {
    digits = sciMatch[1] + (sciMatch[2] ?? "");
    exponent = Number(sciMatch[3]) - (sciMatch[2]?.length ?? 0);
  } else {
    const dot = repr.indexOf(".");
    if (dot === -1) {
      digits = repr;
      exponent = 0;
    } else {
      digits = repr.slice(0, dot) + repr.slice(dot + 1);
      exponent = -(repr.length - dot - 1);
    }
    digits = digits.replace(/^0+(?=\d)/, "");
  }
  while (digits.length > 1 && digits.endsWith("0")) {
    digits = digits.slice(0, -1);
    exponent += 1;
  }
  const adjusted = digits.length + exponent - 1;
  let plain: string;
  if (exponent >= 0) {
    plain = digits + "0".repeat(exponent);
  } else {
    const point = digits.length + exponent;
    plain =
      point > 0
        ? digits.slice(0, point) + "." + digits.slice(point)
        : "0." + "0".repeat(-point) + digits;
  }
  const mantissa = digits[0] + (digits.length > 1 ? "." + digits.slice(1) : "");
  return { plain, scientific: `${mantissa}e${adjusted}`, adjusted };
}

function startsWithMinus(e: Expression): boolean {
  if (e.kind === "const") return e.value < 0;
  return e.kind === "apply" && e.op === "neg";
}

export function print(e: Expression): string {
  switch (e.kind) {
    case "const":
      return formatConstant(e.value);
    case "var":
      return `v${e.index}`;
    case "apply": {
      const { op, args } = e;
      if (op === "+" || op === "*") {
        const parts: string[] = [];
        let node: Expression = e;
        while (node.kind === "apply" && node.op === op) {
          parts.push(print(node.args[1]));
          node = node.args[0];
        }
        parts.push(print(node));
        return "(" + parts.reverse().join(op) + ")";
      }
      if (op === "-" || op === "/" || op === "^") {
        let left = print(args[0]);
        if (op === "^" && startsWithMinus(args[0])) left = `(${left})`;
        return `(${left}${op}${print(args[1])})`;
      }
      if (op === "neg") return `-(${print(args[0])})`;
      return `${op}(${print(args[0])})`;
    }
  }
}

// ---------------------------------------------------------------------------
// evaluation
// ---------------------------------------------------------------------------

/** IEEE evaluation; NaN marks a domain violation or overflow. */
export function evaluate(e: Expression, point: Map<number, number>): number {
  switch (e.kind) {
    case "const":
      return e.value;
    case "var": {
      const value = point.get(e.index);
      if (value === undefined) throw new Error(`variable v${e.index} is not bound`);
      return value;
    }
    case "apply": {
      const a = evaluate(e.args[0], point);
      if (Number.isNaN(a)) return NaN;
      let result: number;
      if (e.args.length === 2) {
        const b = evaluate(e.args[1], point);
        if (Number.isNaN(b)) return NaN;
        switch (e.op) {
          case "+": result = a + b; break;
          case "-": result = a - b; break;
          case "*": result = a * b; break;
          case "/": result = a / b; break;
          case "^": result = Math.pow(a, b); break;
          default: throw new Error(`unknown operator ${e.op}`);
        }
      } else {
        switch (e.op) {
          case "neg": result = -a; break;
          case "exp": result = Math.exp(a); break;
          case "log": result = Math.log(a); break;
          case "sqrt": result = Math.sqrt(a); break;
          case "sin": result = Math.sin(a); break;
          case "cos": result = Math.cos(a); break;
          case "tanh": result = Math.tanh(a); break;
          default: throw new Error(`unknown operator ${e.op}`);
        }
      }
      return Number.isFinite(result) ? result : NaN;
    }
  }
}

export function variablesOf(e: Expression, into = new Set<number>()): Set<number> {
  if (e.kind === "var") into.add(e.index);
  if (e.kind === "apply") for (const child of e.args) variablesOf(child, into);
  return into;
}
