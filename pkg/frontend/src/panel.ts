// Context panel: one control per catalog factor, widget chosen by kind
// and acquisition mode. Every interaction is a POST /context/events; the
// panel itself holds no factor state.

import { ApiClient } from './api.js';
import { ControlSpec, controlsFor } from './catalogControls.js';
import { clear, el } from './dom.js';
import type { Catalog, WireValue } from './types.js';

export class ContextPanel {
  constructor(
    readonly root: HTMLElement,
    private readonly api: ApiClient,
    catalog: Catalog,
    private readonly onError: (message: string) => void
  ) {
    root.append(el('h2', {}, 'Context'));
    const box = el('div', { class: 'controls' });
    for (const spec of controlsFor(catalog)) {
      box.append(this.control(spec));
    }
    root.append(box);
  }

  private send(spec: ControlSpec, value: WireValue): void {
    void this.api.sendEvent(spec.factor, value).catch((err) => {
      this.onError(String(err instanceof Error ? err.message : err));
    });
  }

  private numeric(spec: ControlSpec, raw: string | number): WireValue {
    const n = typeof raw === 'number' ? raw : Number(raw);
    return spec.kind === 'int'
      ? { kind: 'int', value: Math.round(n) }
      : { kind: 'float', value: n };
  }

  private control(spec: ControlSpec): HTMLElement {
    const box = el('div', {
      class: `control control-${spec.control}`,
      'data-factor': spec.factor,
      title: spec.description,
    });
    box.append(el('span', { class: 'control-name' }, spec.factor));

    switch (spec.control) {
      case 'slider': {
        const slider = el('input', {
          type: 'range',
          class: 'control-slider',
          min: String(spec.min),
          max: String(spec.max),
          step: String(spec.step),
        });
        const number = el('input', { type: 'number', class: 'control-number' });
        const commit = (raw: string) => {
          slider.value = raw;
          number.value = raw;
          this.send(spec, this.numeric(spec, raw));
        };
        slider.addEventListener('change', () => commit(slider.value));
        number.addEventListener('change', () => commit(number.value));
        box.append(slider, number);
        break;
      }
      case 'toggle': {
        const toggle = el('input', { type: 'checkbox', class: 'control-toggle' });
        toggle.addEventListener('change', () => {
          this.send(spec, { kind: 'bool', value: toggle.checked });
        });
        box.append(toggle);
        break;
      }
      case 'pulse': {
        const button = el('button', { class: 'control-pulse' }, 'pulse');
        button.addEventListener('click', () => {
          this.send(spec, { kind: 'bool', value: true });
        });
        box.append(button);
        break;
      }
      case 'choice': {
        for (const value of spec.choices) {
          const chip = el('button', { class: 'control-choice', 'data-value': value }, value);
          chip.addEventListener('click', () => {
            this.send(spec, { kind: 'text', value });
          });
          box.append(chip);
        }
        break;
      }
      case 'textinput': {
        const input = el('input', { class: 'control-text', placeholder: 'value' });
        const send = el('button', { class: 'control-send' }, 'send');
        send.addEventListener('click', () => {
          this.send(spec, { kind: 'text', value: input.value });
        });
        box.append(input, send);
        break;
      }
      case 'latlon': {
        const lat = el('input', { type: 'number', class: 'control-lat', placeholder: 'lat', step: 'any' });
        const lon = el('input', { type: 'number', class: 'control-lon', placeholder: 'lon', step: 'any' });
        const send = el('button', { class: 'control-send' }, 'send');
        send.addEventListener('click', () => {
          this.send(spec, { kind: 'geo', lat: Number(lat.value), lon: Number(lon.value) });
        });
        box.append(lat, lon, send);
        break;
      }
      case 'readonly':
        box.append(el('span', { class: 'control-readonly' }, 'polled'));
        break;
    }
    return box;
  }
}

export function rebuildPanel(
  root: HTMLElement,
  api: ApiClient,
  catalog: Catalog,
  onError: (message: string) => void
): ContextPanel {
  clear(root);
  return new ContextPanel(root, api, catalog, onError);
}
