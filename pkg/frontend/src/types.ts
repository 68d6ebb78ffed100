// Wire types for the m3i service. Everything here mirrors the JSON the
// server actually sends; nothing is invented client-side.

export type ValueKindName = 'bool' | 'int' | 'float' | 'text' | 'geo';
export type ModeName = 'push' | 'pull' | 'pulse';

export interface FactorSpec {
  id: string;
  kind: ValueKindName;
  mode: ModeName;
  description: string;
}

export type Catalog = FactorSpec[];

/** Tagged value encoding; `geo` carries lat/lon instead of `value`. */
export type WireValue =
  | { kind: 'bool'; value: boolean }
  | { kind: 'int'; value: number }
  | { kind: 'float'; value: number }
  | { kind: 'text'; value: string }
  | { kind: 'geo'; lat: number; lon: number };

export interface Diagnostic {
  severity: string;
  message: string;
  line: number;
  col: number;
}

export interface ErrorBody {
  error: string;
  diagnostics?: Diagnostic[];
}

export type Truth = 'true' | 'false' | 'unknown';

export interface FiringRecord {
  time: number;
  trigger: string;
  source: string; // "rule_id/then" or "rule_id/else"
  diff: Record<string, unknown>;
}

/** Primitive device fields as they appear in tick reports. */
export interface DeviceFields {
  ringer: string;
  vibrating: boolean;
  screen_brightness: number;
  notification_led: boolean;
  wifi_enabled: boolean;
  sync_enabled: boolean;
  screen_locked: boolean;
  last_sound_played: string | null;
  emitted_messages: [number, string, unknown][];
}

/** GET /device adds the manual override table; tick reports do not carry it. */
export interface DeviceView extends DeviceFields {
  manual_overrides: Record<string, unknown>;
}

export interface TickReport {
  tick_time: number;
  snapshot: string;
  rules: Record<string, Truth>;
  firings: FiringRecord[];
  device: DeviceFields;
}

// Rule AST JSON, as listed by GET /rules.

export interface StmtJson {
  type: 'stmt';
  factor: string;
  op: string;
  arg?: unknown;
  lo?: number;
  hi?: number;
  pattern?: string;
  lat?: number;
  lon?: number;
  radius?: number;
}

export interface UnaryJson {
  type: 'unary';
  op: 'not';
  child: ExprJson;
}

export interface BinaryJson {
  type: 'binary';
  op: 'and' | 'or' | 'xor' | 'nand' | 'nor' | 'xnor';
  left: ExprJson;
  right: ExprJson;
}

export type ExprJson = StmtJson | UnaryJson | BinaryJson;

export type ActionJson =
  | { type: 'set'; setting: string; value: unknown }
  | { type: 'play'; sound: string }
  | { type: 'vibrate'; pattern: number[] }
  | { type: 'emit'; channel: string; payload: unknown }
  | { type: 'call'; callback: string }
  | { type: 'nothing' }
  | RuleJson;

export interface RuleJson {
  type: 'rule';
  id: string;
  when: ExprJson;
  then: ActionJson;
  else?: ActionJson | null;
  enabled: boolean;
}

export interface SimMode {
  mode: 'stepped' | 'live';
  tick_interval?: number;
}
