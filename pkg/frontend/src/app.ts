// Composition root. Boot fetches everything the view needs from the
// server, renders, then follows the event stream. A hard refresh rebuilds
// the identical view from the same GETs; no engine state lives here.

import { ApiClient, ApiError } from './api.js';
import { BuilderPanel } from './builder.js';
import { clear, el } from './dom.js';
import { ContextPanel } from './panel.js';
import { ReportStream } from './stream.js';
import { deviceFields, parseOverrideValue, settableSettings, tileModels } from './tiles.js';
import { rowModel } from './timeline.js';
import type { DeviceFields, SimMode, TickReport } from './types.js';

export class App {
  private readonly api: ApiClient;
  private stream: ReportStream | null = null;
  private builder: BuilderPanel | null = null;

  private fields: DeviceFields | null = null;
  private overrides: Record<string, unknown> = {};
  private mode: SimMode = { mode: 'stepped' };

  private banner!: HTMLElement;
  private modeIndicator!: HTMLElement;
  private modeToggle!: HTMLButtonElement;
  private advance!: HTMLButtonElement;
  private tiles!: HTMLElement;
  private timeline!: HTMLElement;
  private toastBox!: HTMLElement;

  constructor(readonly root: HTMLElement, base = '') {
    this.api = new ApiClient(base);
  }

  async boot(): Promise<void> {
    const [catalog, rules, device, mode] = await Promise.all([
      this.api.catalog(),
      this.api.listRules(),
      this.api.device(),
      this.api.getMode(),
    ]);
    this.fields = deviceFields(device);
    this.overrides = device.manual_overrides;
    this.mode = mode;

    clear(this.root);
    this.banner = el('div', { class: 'stream-banner' },
      'event stream disconnected, reconnecting...');
    this.banner.style.display = 'none';
    this.modeIndicator = el('span', { class: 'mode-indicator' }, mode.mode);
    this.modeToggle = el('button', { class: 'mode-toggle' }, 'switch mode');
    this.modeToggle.addEventListener('click', () => void this.toggleMode());
    this.advance = el('button', { class: 'advance-tick' }, 'advance tick');
    this.advance.addEventListener('click', () => {
      void this.api.step().catch((err) => this.toast(errText(err)));
    });
    this.toastBox = el('div', { class: 'toast' });
    this.toastBox.style.display = 'none';

    const header = el('header', {},
      el('h1', {}, 'm3i'),
      this.modeIndicator,
      this.modeToggle,
      this.advance,
      this.banner
    );

    const builderRoot = el('section', { class: 'builder' });
    const panelRoot = el('section', { class: 'context-panel' });
    this.tiles = el('div', { class: 'tiles' });
    this.timeline = el('div', { class: 'timeline' });
    const right = el('section', { class: 'device' },
      el('h2', {}, 'Device'),
      this.tiles,
      el('h2', {}, 'Timeline'),
      this.timeline
    );

    this.root.append(header, this.toastBox,
      el('main', {}, builderRoot, panelRoot, right));

    this.builder = new BuilderPanel(
      builderRoot,
      this.api,
      catalog,
      settableSettings(device),
      () => void this.refreshShared(),
      (message) => this.toast(message)
    );
    this.builder.renderRules(rules);
    new ContextPanel(panelRoot, this.api, catalog, (m) => this.toast(m));

    this.renderModeControls();
    this.renderTiles();

    this.stream = new ReportStream(this.api.base, {
      onReport: (report) => this.onReport(report),
      onStatus: (connected) => {
        this.banner.style.display = connected ? 'none' : '';
        this.root.dataset.stream = connected ? 'on' : 'off';
      },
    });
    this.stream.start();
  }

  stop(): void {
    this.stream?.stop();
  }

  // -- server-confirmed state flows -------------------------------------

  private async refreshShared(): Promise<void> {
    try {
      const [rules, device] = await Promise.all([
        this.api.listRules(),
        this.api.device(),
      ]);
      this.builder?.renderRules(rules);
      this.builder?.setSettings(settableSettings(device));
      this.fields = deviceFields(device);
      this.overrides = device.manual_overrides;
      this.renderTiles();
    } catch (err) {
      this.toast(errText(err));
    }
  }

  private onReport(report: TickReport): void {
    this.fields = report.device;
    this.renderTiles();
    this.builder?.updateTruths(report.rules);
    this.appendRow(report);
  }

  private async toggleMode(): Promise<void> {
    const next = this.mode.mode === 'stepped' ? 'live' : 'stepped';
    try {
      await this.api.setMode(next);
      this.mode = await this.api.getMode();
      this.renderModeControls();
    } catch (err) {
      this.toast(errText(err));
    }
  }

  private renderModeControls(): void {
    this.modeIndicator.textContent = this.mode.mode;
    this.advance.style.display = this.mode.mode === 'stepped' ? '' : 'none';
  }

  // -- rendering --------------------------------------------------------

  private renderTiles(): void {
    if (this.fields === null) {
      return;
    }
    clear(this.tiles);
    for (const model of tileModels(this.fields, this.overrides)) {
      const tile = el('div', {
        class: `tile${model.overridden ? ' overridden' : ''}`,
        'data-setting': model.setting,
      });
      tile.append(
        el('span', { class: 'tile-label' }, model.label),
        el('b', { class: 'tile-value' }, model.value)
      );
      if (model.overridden) {
        tile.append(el('span', { class: 'override-badge' }, 'override'));
      }
      if (model.settable) {
        const input = el('input', { class: 'override-input', placeholder: 'override' });
        const apply = el('button', { class: 'override-apply' }, 'set');
        apply.addEventListener('click', () => {
          void this.api
            .override(model.setting, parseOverrideValue(input.value))
            .then((device) => {
              this.fields = deviceFields(device);
              this.overrides = device.manual_overrides;
              this.renderTiles();
            })
            .catch((err) => this.toast(errText(err)));
        });
        tile.append(input, apply);
        if (model.overridden) {
          const clearBtn = el('button', { class: 'override-clear' }, 'clear');
          clearBtn.addEventListener('click', () => {
            void this.api
              .clearOverride(model.setting)
              .then((device) => {
                this.fields = device;
                this.overrides = device.manual_overrides;
                this.renderTiles();
              })
              .catch((err) => this.toast(errText(err)));
          });
          tile.append(clearBtn);
        }
      }
      this.tiles.append(tile);
    }
  }

  private appendRow(report: TickReport): void {
    const model = rowModel(report);
    const truths = el('span', { class: 'row-truths' });
    for (const t of model.truths) {
      truths.append(el('span', { class: `truth-chip truth-${t.truth}` }, `${t.id}=${t.truth}`));
    }
    const firings = el('span', { class: 'row-firings' });
    for (const f of model.firings) {
      firings.append(el('span', { class: 'firing' }, f));
    }
    const row = el('div', {
      class: `timeline-row${model.fired ? ' fired' : ''}`,
      'data-time': String(model.time),
    }, el('span', { class: 'row-time' }, `t=${model.time}`), truths, firings);
    this.timeline.append(row);
    this.timeline.scrollTop = this.timeline.scrollHeight;
  }

  private toast(message: string): void {
    this.toastBox.textContent = message;
    this.toastBox.style.display = '';
    setTimeout(() => {
      this.toastBox.style.display = 'none';
    }, 4000);
  }
}

function errText(err: unknown): string {
  if (err instanceof ApiError) {
    return err.message;
  }
  return String(err instanceof Error ? err.message : err);
}
