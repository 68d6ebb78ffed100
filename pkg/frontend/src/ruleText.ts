// Render rule AST JSON (as listed by GET /rules) back into rule-language
// text for display. Display only: whole-number floats lose their ".0" in
// JSON, so this text is not guaranteed to reparse to the identical AST.

import type { ActionJson, BinaryJson, ExprJson, RuleJson, StmtJson } from './types.js';

const OP_SYMBOLS: Record<string, string> = {
  eq: '==',
  ne: '!=',
  lt: '<',
  le: '<=',
  gt: '>',
  ge: '>=',
};

// Binding tiers, loosest first; binaries in the same tier associate left.
const TIERS: Record<string, number> = {
  or: 0,
  nor: 0,
  xor: 1,
  xnor: 1,
  and: 2,
  nand: 2,
};

function literal(v: unknown): string {
  if (typeof v === 'string') {
    return JSON.stringify(v);
  }
  return String(v);
}

function stmtText(s: StmtJson): string {
  switch (s.op) {
    case 'in_range':
      return `${s.factor} in [${s.lo}, ${s.hi}]`;
    case 'matches':
      return `${s.factor} matches /${(s.pattern ?? '').replace(/\//g, '\\/')}/`;
    case 'within':
      return `${s.factor} within ${s.radius} of (${s.lat}, ${s.lon})`;
    default:
      return `${s.factor} ${OP_SYMBOLS[s.op] ?? s.op} ${literal(s.arg)}`;
  }
}

function child(parent: BinaryJson, e: ExprJson, right: boolean): string {
  const text = exprText(e);
  if (e.type !== 'binary') {
    return text;
  }
  const pt = TIERS[parent.op];
  const ct = TIERS[e.op];
  const need = ct < pt || (ct === pt && right);
  return need ? `(${text})` : text;
}

export function exprText(e: ExprJson): string {
  if (e.type === 'stmt') {
    return stmtText(e);
  }
  if (e.type === 'unary') {
    const inner = exprText(e.child);
    return e.child.type === 'binary' ? `not (${inner})` : `not ${inner}`;
  }
  return `${child(e, e.left, false)} ${e.op} ${child(e, e.right, true)}`;
}

export function actionText(a: ActionJson): string {
  switch (a.type) {
    case 'set':
      return `set ${a.setting} = ${typeof a.value === 'boolean' ? String(a.value) : a.value}`;
    case 'play':
      return `play ${JSON.stringify(a.sound)}`;
    case 'vibrate':
      return `vibrate [${a.pattern.join(', ')}]`;
    case 'emit':
      return `emit ${a.channel} ${JSON.stringify(a.payload)}`;
    case 'call':
      return `call ${a.callback}`;
    case 'nothing':
      return 'nothing';
    case 'rule':
      return `rule ${a.id}: ...`; // nested rules collapse in list view
  }
}

export function ruleText(r: RuleJson): string {
  const lines = [`rule ${r.id}:`, `  when ${exprText(r.when)}`, `  then ${actionText(r.then)}`];
  if (r.else != null) {
    lines.push(`  else ${actionText(r.else)}`);
  }
  return lines.join('\n');
}
