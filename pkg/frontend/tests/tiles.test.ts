import { describe, expect, it } from 'vitest';
import { deviceFields, parseOverrideValue, settableSettings, tileModels } from '../src/tiles.js';
import type { DeviceFields, DeviceView } from '../src/types.js';

const DEVICE: DeviceFields = {
  ringer: 'normal',
  vibrating: false,
  screen_brightness: 0.8,
  notification_led: false,
  wifi_enabled: true,
  sync_enabled: true,
  screen_locked: false,
  last_sound_played: null,
  emitted_messages: [],
};

describe('device fields', () => {
  it('drops the override table from a full device response', () => {
    const view: DeviceView = { ...DEVICE, manual_overrides: { ringer: 'silent' } };
    expect(deviceFields(view)).toEqual(DEVICE);
    expect(tileModels(deviceFields(view), view.manual_overrides).map((m) => m.setting))
      .not.toContain('manual_overrides');
  });
});

describe('settable settings', () => {
  it('reads the settable fields off the device json', () => {
    expect(settableSettings(DEVICE)).toEqual([
      'ringer',
      'vibrating',
      'screen_brightness',
      'notification_led',
      'wifi_enabled',
      'sync_enabled',
      'screen_locked',
    ]);
  });

  it('keeps excluding played sounds even when one is set', () => {
    const played = { ...DEVICE, last_sound_played: 'ding' };
    expect(settableSettings(played)).not.toContain('last_sound_played');
  });
});

describe('tile models', () => {
  it('builds one tile per device field', () => {
    const models = tileModels(DEVICE, {});
    expect(models.map((m) => m.setting)).toEqual(Object.keys(DEVICE));
    const ringer = models.find((m) => m.setting === 'ringer');
    expect(ringer).toMatchObject({ value: 'normal', overridden: false, settable: true });
  });

  it('renders booleans, numbers, and info fields readably', () => {
    const models = tileModels(
      { ...DEVICE, last_sound_played: 'ding', emitted_messages: [[0, 'hud', {}]] },
      {}
    );
    const byName = new Map(models.map((m) => [m.setting, m]));
    expect(byName.get('wifi_enabled')?.value).toBe('on');
    expect(byName.get('vibrating')?.value).toBe('off');
    expect(byName.get('screen_brightness')?.value).toBe('0.80');
    expect(byName.get('last_sound_played')?.value).toBe('ding');
    expect(byName.get('emitted_messages')?.value).toBe('1 sent');
    expect(byName.get('emitted_messages')?.settable).toBe(false);
  });

  it('flags overridden settings', () => {
    const models = tileModels(DEVICE, { ringer: 'silent' });
    expect(models.find((m) => m.setting === 'ringer')?.overridden).toBe(true);
    expect(models.find((m) => m.setting === 'vibrating')?.overridden).toBe(false);
  });

  it('spells underscored labels with spaces', () => {
    const models = tileModels(DEVICE, {});
    expect(models.find((m) => m.setting === 'screen_brightness')?.label).toBe(
      'screen brightness'
    );
  });
});

describe('override input parsing', () => {
  it('reads booleans and numbers by spelling', () => {
    expect(parseOverrideValue('true')).toBe(true);
    expect(parseOverrideValue(' false ')).toBe(false);
    expect(parseOverrideValue('0.5')).toBe(0.5);
    expect(parseOverrideValue('3')).toBe(3);
  });

  it('passes anything else through as text', () => {
    expect(parseOverrideValue('silent')).toBe('silent');
    expect(parseOverrideValue('')).toBe('');
  });
});
