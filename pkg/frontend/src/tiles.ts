// Device state tiles: view models derived from the last server-confirmed
// device JSON plus the manual override table.

import type { DeviceFields, DeviceView } from './types.js';

export interface TileModel {
  setting: string;
  label: string;
  value: string;
  overridden: boolean;
  settable: boolean;
}

// Display fields that are not settings and take no overrides.
const INFO_FIELDS = new Set(['last_sound_played', 'emitted_messages']);

/**
 * Reduce a full device response to the displayable fields. Tick reports
 * carry the fields alone; REST responses add the override table, which
 * is tracked separately and must not become a tile.
 */
export function deviceFields(view: DeviceView): DeviceFields {
  const { manual_overrides: _overrides, ...fields } = view;
  return fields;
}

export function labelFor(setting: string): string {
  return setting.replace(/_/g, ' ');
}

function displayValue(setting: string, value: unknown): string {
  if (typeof value === 'boolean') {
    return value ? 'on' : 'off';
  }
  if (typeof value === 'number') {
    return Number.isInteger(value) ? String(value) : value.toFixed(2);
  }
  if (value === null) {
    return 'none';
  }
  if (Array.isArray(value)) {
    return `${value.length} sent`;
  }
  return String(value);
}

/**
 * Settable field names, read off the device JSON itself: every primitive
 * field except the informational ones.
 */
export function settableSettings(fields: DeviceFields): string[] {
  return Object.entries(fields)
    .filter(([key, value]) => !INFO_FIELDS.has(key) && typeof value !== 'object')
    .map(([key]) => key);
}

export function tileModels(
  fields: DeviceFields,
  overrides: Record<string, unknown>
): TileModel[] {
  return Object.entries(fields).map(([setting, value]) => ({
    setting,
    label: labelFor(setting),
    value: displayValue(setting, value),
    overridden: setting in overrides,
    settable: !INFO_FIELDS.has(setting) && typeof value !== 'object',
  }));
}

/**
 * Interpret override input text: booleans and numbers by spelling,
 * anything else as a plain string. The server validates the rest.
 */
export function parseOverrideValue(text: string): unknown {
  const trimmed = text.trim();
  if (trimmed === 'true' || trimmed === 'false') {
    return trimmed === 'true';
  }
  if (trimmed !== '' && !Number.isNaN(Number(trimmed))) {
    return Number(trimmed);
  }
  return trimmed;
}
