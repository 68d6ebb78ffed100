// Rule draft model for the builder form. The draft never evaluates
// anything itself: it only renders rule text, and the server's response
// to that text is the sole source of validity.

import type { Catalog, Diagnostic, ValueKindName } from './types.js';

export type ConditionOp =
  | 'eq'
  | 'ne'
  | 'lt'
  | 'le'
  | 'gt'
  | 'ge'
  | 'in'
  | 'matches'
  | 'within';

export type Joiner = 'and' | 'or' | 'xor' | 'nand' | 'nor' | 'xnor';

/**
 * One condition row. `a`, `b`, `c` are raw user text whose meaning
 * depends on the operator: comparison value, [a, b] range bounds, regex
 * pattern, or radius / lat / lon for `within`.
 */
export interface ConditionRow {
  joiner: Joiner; // connects this row to the previous one; ignored on row 0
  negated: boolean;
  factor: string;
  op: ConditionOp;
  a: string;
  b: string;
  c: string;
}

export type ActionKind =
  | 'set'
  | 'play'
  | 'vibrate'
  | 'emit'
  | 'call'
  | 'nothing'
  | 'none'; // else only: omit the branch entirely

export interface ActionDraft {
  kind: ActionKind;
  setting: string;
  value: string;
  sound: string;
  pattern: string; // comma-separated vibration durations
  channel: string;
  payload: string; // raw JSON object text
  callback: string;
}

export interface RuleDraft {
  id: string;
  rows: ConditionRow[];
  then: ActionDraft;
  otherwise: ActionDraft;
}

export const OP_LABELS: Record<ConditionOp, string> = {
  eq: '==',
  ne: '!=',
  lt: '<',
  le: '<=',
  gt: '>',
  ge: '>=',
  in: 'in range',
  matches: 'matches',
  within: 'within',
};

export const JOINERS: Joiner[] = ['and', 'or', 'xor', 'nand', 'nor', 'xnor'];

export function emptyAction(kind: ActionKind = 'nothing'): ActionDraft {
  return {
    kind,
    setting: 'ringer',
    value: '',
    sound: '',
    pattern: '',
    channel: '',
    payload: '{}',
    callback: '',
  };
}

export function emptyRow(): ConditionRow {
  return {
    joiner: 'and',
    negated: false,
    factor: '',
    op: 'eq',
    a: '',
    b: '',
    c: '',
  };
}

export function emptyDraft(): RuleDraft {
  return {
    id: '',
    rows: [emptyRow()],
    then: emptyAction('set'),
    otherwise: emptyAction('none'),
  };
}

/** Quote a text literal the way the rule language expects (JSON string). */
export function quoteText(s: string): string {
  return JSON.stringify(s);
}

/** Escape `/` so the pattern fits inside a /.../ literal. */
export function escapePattern(p: string): string {
  return p.replace(/\//g, '\\/');
}

const QUOTED = /^".*"$/;

function literalText(row: ConditionRow, kind: ValueKindName | null): string {
  const raw = row.a.trim();
  // Convenience only: bare text against a text factor gets quoted so the
  // common case types `upright`, not `"upright"`. Anything else passes
  // through verbatim and the server reports what it thinks of it.
  if (kind === 'text' && raw !== '' && !QUOTED.test(raw)) {
    return quoteText(raw);
  }
  return raw;
}

function rowText(row: ConditionRow, kind: ValueKindName | null): string {
  let stmt: string;
  switch (row.op) {
    case 'in':
      stmt = `${row.factor} in [${row.a.trim()}, ${row.b.trim()}]`;
      break;
    case 'matches':
      stmt = `${row.factor} matches /${escapePattern(row.a.trim())}/`;
      break;
    case 'within':
      stmt = `${row.factor} within ${row.a.trim()} of (${row.b.trim()}, ${row.c.trim()})`;
      break;
    default:
      stmt = `${row.factor} ${OP_LABELS[row.op]} ${literalText(row, kind)}`;
  }
  const wrapped = `(${stmt})`;
  return row.negated ? `not ${wrapped}` : wrapped;
}

function actionText(action: ActionDraft): string {
  switch (action.kind) {
    case 'set':
      return `set ${action.setting} = ${action.value.trim()}`;
    case 'play':
      return `play ${quoteText(action.sound)}`;
    case 'vibrate':
      return `vibrate [${action.pattern.trim()}]`;
    case 'emit':
      return `emit ${action.channel.trim()} ${action.payload.trim()}`;
    case 'call':
      return `call ${action.callback.trim()}`;
    default:
      return 'nothing';
  }
}

export interface GeneratedRule {
  text: string;
  /** 1-based source line of each condition row, by row index. */
  whenLines: number[];
  thenLine: number;
  elseLine: number; // -1 when the else branch is omitted
}

/**
 * Render the draft as rule text, one condition row per line so server
 * diagnostics map back to form rows by line number. Rows combine with
 * the language's own precedence (not, then and-family, then xor-family,
 * then or-family); the source view shows exactly what is submitted.
 */
export function generateRuleText(
  draft: RuleDraft,
  catalog: Catalog
): GeneratedRule {
  const kinds = new Map<string, ValueKindName>(
    catalog.map((spec) => [spec.id, spec.kind])
  );
  const lines: string[] = [`rule ${draft.id.trim()}:`];
  const whenLines: number[] = [];
  draft.rows.forEach((row, i) => {
    const text = rowText(row, kinds.get(row.factor) ?? null);
    lines.push(i === 0 ? `  when ${text}` : `    ${row.joiner} ${text}`);
    whenLines.push(lines.length);
  });
  lines.push(`  then ${actionText(draft.then)}`);
  const thenLine = lines.length;
  let elseLine = -1;
  if (draft.otherwise.kind !== 'none') {
    lines.push(`  else ${actionText(draft.otherwise)}`);
    elseLine = lines.length;
  }
  return { text: lines.join('\n') + '\n', whenLines, thenLine, elseLine };
}

export interface MappedDiagnostics {
  rows: Map<number, string[]>;
  then: string[];
  otherwise: string[];
  general: string[];
}

/** Attach server diagnostics to the form parts that produced them. */
export function mapDiagnostics(
  diags: Diagnostic[],
  gen: GeneratedRule
): MappedDiagnostics {
  const out: MappedDiagnostics = {
    rows: new Map(),
    then: [],
    otherwise: [],
    general: [],
  };
  for (const d of diags) {
    const row = gen.whenLines.indexOf(d.line);
    if (row >= 0) {
      const bucket = out.rows.get(row) ?? [];
      bucket.push(d.message);
      out.rows.set(row, bucket);
    } else if (d.line === gen.thenLine) {
      out.then.push(d.message);
    } else if (d.line === gen.elseLine) {
      out.otherwise.push(d.message);
    } else {
      out.general.push(d.line > 0 ? `line ${d.line}: ${d.message}` : d.message);
    }
  }
  return out;
}

/**
 * Structural readiness only (something to submit at all). Semantic
 * validity is the server's call.
 */
export function draftShaped(draft: RuleDraft): boolean {
  return (
    draft.id.trim() !== '' &&
    draft.rows.length > 0 &&
    draft.rows.every((r) => r.factor !== '')
  );
}
