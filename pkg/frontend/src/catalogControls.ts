// Derive context-panel controls from the factor catalog. Nothing here
// names a factor: the widget follows the declared kind and acquisition
// mode, and value choices come out of the catalog descriptions.

import type { Catalog, FactorSpec, ModeName, ValueKindName } from './types.js';

export type ControlType =
  | 'slider' // numeric push factor
  | 'toggle' // boolean push factor
  | 'pulse' // boolean pulse factor, one-tick latch
  | 'choice' // text factor with enumerated values
  | 'textinput' // free-text factor
  | 'latlon' // geo factor
  | 'readonly'; // pull factor, polled by the engine, takes no events

export interface ControlSpec {
  factor: string;
  kind: ValueKindName;
  mode: ModeName;
  description: string;
  control: ControlType;
  min: number;
  max: number;
  step: number;
  choices: string[];
}

// Unit words to slider ranges. Keyed on wording, not on factor ids, so a
// catalog extension with "percent" in its description gets the same
// treatment as the built-ins.
const UNIT_RANGES: [RegExp, { min: number; max: number; step: number }][] = [
  [/percent/i, { min: 0, max: 100, step: 1 }],
  [/lux/i, { min: 0, max: 1000, step: 1 }],
  [/\bdb\b/i, { min: 0, max: 120, step: 1 }],
  [/m\/s\^?2/i, { min: -20, max: 20, step: 0.1 }],
];

function sliderRange(spec: FactorSpec): { min: number; max: number; step: number } {
  for (const [re, range] of UNIT_RANGES) {
    if (re.test(spec.description)) {
      return range;
    }
  }
  const explicit = /\b(-?\d+)-(-?\d+)\b/.exec(spec.description);
  if (explicit) {
    return { min: Number(explicit[1]), max: Number(explicit[2]), step: 1 };
  }
  return { min: 0, max: 100, step: spec.kind === 'int' ? 1 : 0.1 };
}

const CHOICE_TOKEN = /^[a-z0-9_]+$/;

/**
 * A description like "device pose: display_up, display_down, upright"
 * enumerates the factor's values; turn that into preset choices.
 */
export function choicesFrom(description: string): string[] {
  const colon = description.indexOf(':');
  if (colon < 0) {
    return [];
  }
  const tokens = description
    .slice(colon + 1)
    .split(',')
    .map((t) => t.replace(/\(.*\)/, '').trim());
  if (tokens.some((t) => !CHOICE_TOKEN.test(t))) {
    return [];
  }
  return tokens;
}

export function controlFor(spec: FactorSpec): ControlSpec {
  const base: ControlSpec = {
    factor: spec.id,
    kind: spec.kind,
    mode: spec.mode,
    description: spec.description,
    control: 'textinput',
    min: 0,
    max: 100,
    step: 1,
    choices: [],
  };
  if (spec.mode === 'pull') {
    return { ...base, control: 'readonly' };
  }
  if (spec.mode === 'pulse') {
    return { ...base, control: 'pulse' };
  }
  switch (spec.kind) {
    case 'bool':
      return { ...base, control: 'toggle' };
    case 'int':
    case 'float':
      return { ...base, control: 'slider', ...sliderRange(spec) };
    case 'geo':
      return { ...base, control: 'latlon' };
    case 'text': {
      const choices = choicesFrom(spec.description);
      return choices.length > 0
        ? { ...base, control: 'choice', choices }
        : { ...base, control: 'textinput' };
    }
  }
}

export function controlsFor(catalog: Catalog): ControlSpec[] {
  return catalog.map(controlFor);
}
