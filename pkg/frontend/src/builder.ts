// Rule builder: a form that renders rule text, submits it, and feeds the
// server's diagnostics back onto the offending rows. Also owns the list
// of existing rules with enable toggles and delete buttons.

import { ApiClient, ApiError } from './api.js';
import {
  ActionDraft,
  ActionKind,
  ConditionOp,
  ConditionRow,
  JOINERS,
  MappedDiagnostics,
  OP_LABELS,
  RuleDraft,
  draftShaped,
  emptyAction,
  emptyDraft,
  emptyRow,
  generateRuleText,
  mapDiagnostics,
} from './draft.js';
import { clear, el } from './dom.js';
import { ruleText } from './ruleText.js';
import type { Catalog, RuleJson, Truth } from './types.js';

const THEN_KINDS: ActionKind[] = ['set', 'play', 'vibrate', 'emit', 'call', 'nothing'];
const ELSE_KINDS: ActionKind[] = ['none', ...THEN_KINDS];

function option(value: string, label: string, selected: boolean): HTMLOptionElement {
  const node = el('option', { value }, label);
  node.selected = selected;
  return node;
}

export class BuilderPanel {
  private draft: RuleDraft = emptyDraft();
  private diags: MappedDiagnostics | null = null;
  private invalid = false; // last submit was rejected and nothing changed since
  private sourceOpen = false;
  private rules: RuleJson[] = [];
  private truths: Record<string, Truth> = {};

  private readonly form: HTMLElement;
  private readonly list: HTMLElement;

  constructor(
    readonly root: HTMLElement,
    private readonly api: ApiClient,
    private catalog: Catalog,
    private settings: string[],
    private readonly onChanged: () => void,
    private readonly onError: (message: string) => void
  ) {
    this.form = el('div', { class: 'builder-form' });
    this.list = el('div', { class: 'rules-list' });
    root.append(
      el('h2', {}, 'Rules'),
      this.list,
      el('h2', {}, 'New rule'),
      this.form
    );
    this.renderForm();
  }

  setSettings(settings: string[]): void {
    this.settings = settings;
  }

  renderRules(rules: RuleJson[]): void {
    this.rules = rules;
    clear(this.list);
    if (rules.length === 0) {
      this.list.append(el('p', { class: 'empty' }, 'no rules yet'));
      return;
    }
    for (const rule of rules) {
      this.list.append(this.ruleItem(rule));
    }
  }

  /** Refresh the truth chips from the latest tick report. */
  updateTruths(truths: Record<string, Truth>): void {
    this.truths = truths;
    for (const chip of this.list.querySelectorAll<HTMLElement>('.rule-truth')) {
      const id = chip.dataset.ruleId ?? '';
      const truth = truths[id];
      chip.textContent = truth ?? '';
      chip.className = `rule-truth truth-${truth ?? 'none'}`;
    }
  }

  private ruleItem(rule: RuleJson): HTMLElement {
    const enabled = el('input', { type: 'checkbox', class: 'rule-enabled' });
    enabled.checked = rule.enabled;
    enabled.addEventListener('change', () => {
      void this.api
        .setRuleEnabled(rule.id, enabled.checked)
        .then(() => this.onChanged())
        .catch((err) => this.onError(String(err instanceof Error ? err.message : err)));
    });
    const del = el('button', { class: 'rule-delete', title: 'delete rule' }, 'delete');
    del.addEventListener('click', () => {
      void this.api
        .deleteRule(rule.id)
        .then(() => this.onChanged())
        .catch((err) => this.onError(String(err instanceof Error ? err.message : err)));
    });
    const truth = this.truths[rule.id];
    const chip = el(
      'span',
      { class: `rule-truth truth-${truth ?? 'none'}`, 'data-rule-id': rule.id },
      truth ?? ''
    );
    const item = el(
      'div',
      { class: `rule-item${rule.enabled ? '' : ' disabled'}`, 'data-rule-id': rule.id },
      el('div', { class: 'rule-head' }, enabled, el('b', {}, rule.id), chip, del),
      el('pre', { class: 'rule-text' }, ruleText(rule))
    );
    return item;
  }

  // -- form ------------------------------------------------------------

  /** Any edit invalidates stale diagnostics and re-arms submit. */
  private edited(): void {
    this.invalid = false;
    this.diags = null;
    this.renderForm();
  }

  private renderForm(): void {
    clear(this.form);
    const idInput = el('input', {
      class: 'rule-id-input',
      placeholder: 'rule id, e.g. flip_to_mute',
      value: this.draft.id,
    });
    idInput.addEventListener('input', () => {
      this.draft.id = idInput.value;
      this.softRefresh();
    });
    this.form.append(el('div', { class: 'field' }, el('label', {}, 'id'), idInput));

    const rowsBox = el('div', { class: 'cond-rows' });
    this.draft.rows.forEach((row, i) => rowsBox.append(this.rowEditor(row, i)));
    const addRow = el('button', { class: 'add-row' }, '+ condition');
    addRow.addEventListener('click', () => {
      this.draft.rows.push(emptyRow());
      this.edited();
    });
    this.form.append(el('label', {}, 'when'), rowsBox, addRow);

    this.form.append(
      el('label', {}, 'then'),
      this.actionEditor(this.draft.then, 'then'),
      el('label', {}, 'else'),
      this.actionEditor(this.draft.otherwise, 'else')
    );

    const general = el('div', { class: 'builder-general-diags' });
    for (const message of this.diags?.general ?? []) {
      general.append(el('div', { class: 'diag' }, message));
    }
    this.form.append(general);

    const submit = el('button', { class: 'submit-rule' }, 'add rule');
    submit.disabled = this.invalid || !draftShaped(this.draft);
    submit.addEventListener('click', () => void this.submit());
    const toggle = el('button', { class: 'view-source' },
      this.sourceOpen ? 'hide source' : 'view source');
    toggle.addEventListener('click', () => {
      this.sourceOpen = !this.sourceOpen;
      this.renderForm();
    });
    this.form.append(el('div', { class: 'builder-actions' }, submit, toggle));

    const source = el('pre', { class: 'source-view' });
    if (this.sourceOpen) {
      source.textContent = generateRuleText(this.draft, this.catalog).text;
    } else {
      source.style.display = 'none';
    }
    this.form.append(source);
  }

  /** Update source view and submit state without rebuilding inputs. */
  private softRefresh(): void {
    this.invalid = false;
    if (this.diags) {
      // The edit invalidated the last server check; drop its messages.
      this.diags = null;
      for (const box of this.form.querySelectorAll<HTMLElement>(
        '.row-diags, .action-diags, .builder-general-diags'
      )) {
        clear(box);
      }
    }
    const submit = this.form.querySelector<HTMLButtonElement>('.submit-rule');
    if (submit) {
      submit.disabled = !draftShaped(this.draft);
    }
    const source = this.form.querySelector<HTMLElement>('.source-view');
    if (source && this.sourceOpen) {
      source.textContent = generateRuleText(this.draft, this.catalog).text;
    }
  }

  private rowEditor(row: ConditionRow, index: number): HTMLElement {
    const box = el('div', { class: 'cond-row', 'data-row': String(index) });

    if (index > 0) {
      const joiner = el('select', { class: 'joiner-select' });
      for (const j of JOINERS) {
        joiner.append(option(j, j, row.joiner === j));
      }
      joiner.addEventListener('change', () => {
        row.joiner = joiner.value as ConditionRow['joiner'];
        this.edited();
      });
      box.append(joiner);
    }

    const negate = el('input', { type: 'checkbox', class: 'negate', title: 'not' });
    negate.checked = row.negated;
    negate.addEventListener('change', () => {
      row.negated = negate.checked;
      this.edited();
    });
    box.append(el('label', { class: 'negate-label' }, negate, 'not'));

    const factor = el('select', { class: 'factor-select' });
    factor.append(option('', 'factor...', row.factor === ''));
    for (const spec of this.catalog) {
      factor.append(option(spec.id, spec.id, row.factor === spec.id));
    }
    factor.addEventListener('change', () => {
      row.factor = factor.value;
      this.edited();
    });
    box.append(factor);

    const op = el('select', { class: 'op-select' });
    for (const [name, label] of Object.entries(OP_LABELS)) {
      op.append(option(name, label, row.op === name));
    }
    op.addEventListener('change', () => {
      row.op = op.value as ConditionOp;
      this.edited();
    });
    box.append(op);

    box.append(...this.rowValueInputs(row));

    if (this.draft.rows.length > 1) {
      const remove = el('button', { class: 'row-remove', title: 'remove row' }, 'x');
      remove.addEventListener('click', () => {
        this.draft.rows.splice(index, 1);
        this.edited();
      });
      box.append(remove);
    }

    const rowDiags = el('div', { class: 'row-diags' });
    for (const message of this.diags?.rows.get(index) ?? []) {
      rowDiags.append(el('div', { class: 'diag' }, message));
    }
    box.append(rowDiags);
    return box;
  }

  private rowValueInputs(row: ConditionRow): HTMLElement[] {
    const mk = (cls: string, value: string, placeholder: string, set: (v: string) => void) => {
      const input = el('input', { class: cls, value, placeholder });
      input.addEventListener('input', () => {
        set(input.value);
        this.softRefresh();
      });
      return input;
    };
    switch (row.op) {
      case 'in':
        return [
          mk('val-a', row.a, 'low', (v) => (row.a = v)),
          mk('val-b', row.b, 'high', (v) => (row.b = v)),
        ];
      case 'within':
        return [
          mk('val-a', row.a, 'meters', (v) => (row.a = v)),
          mk('val-b', row.b, 'lat', (v) => (row.b = v)),
          mk('val-c', row.c, 'lon', (v) => (row.c = v)),
        ];
      case 'matches':
        return [mk('val-a', row.a, 'regex', (v) => (row.a = v))];
      default:
        return [mk('val-a', row.a, 'value', (v) => (row.a = v))];
    }
  }

  private actionEditor(action: ActionDraft, branch: 'then' | 'else'): HTMLElement {
    const box = el('div', { class: `action-editor ${branch}-editor` });
    const kinds = branch === 'then' ? THEN_KINDS : ELSE_KINDS;
    const kind = el('select', { class: 'action-kind' });
    for (const k of kinds) {
      kind.append(option(k, k === 'none' ? 'no else branch' : k, action.kind === k));
    }
    kind.addEventListener('change', () => {
      const fresh = emptyAction(kind.value as ActionKind);
      Object.assign(action, { ...fresh, kind: kind.value as ActionKind });
      this.edited();
    });
    box.append(kind);

    const mk = (cls: string, value: string, placeholder: string, set: (v: string) => void) => {
      const input = el('input', { class: cls, value, placeholder });
      input.addEventListener('input', () => {
        set(input.value);
        this.softRefresh();
      });
      return input;
    };

    switch (action.kind) {
      case 'set': {
        const setting = el('select', { class: 'action-setting' });
        for (const name of this.settings) {
          setting.append(option(name, name, action.setting === name));
        }
        setting.addEventListener('change', () => {
          action.setting = setting.value;
          this.edited();
        });
        box.append(
          setting,
          '=',
          mk('action-value', action.value, 'value, e.g. vibrate', (v) => (action.value = v))
        );
        break;
      }
      case 'play':
        box.append(mk('action-sound', action.sound, 'sound name', (v) => (action.sound = v)));
        break;
      case 'vibrate':
        box.append(
          mk('action-pattern', action.pattern, 'e.g. 300, 100, 300', (v) => (action.pattern = v))
        );
        break;
      case 'emit':
        box.append(
          mk('action-channel', action.channel, 'channel', (v) => (action.channel = v)),
          mk('action-payload', action.payload, '{"key": "value"}', (v) => (action.payload = v))
        );
        break;
      case 'call':
        box.append(
          mk('action-callback', action.callback, 'callback, e.g. launch.camera', (v) => (action.callback = v))
        );
        break;
      default:
        break;
    }

    const diags = el('div', { class: 'action-diags' });
    const messages = branch === 'then' ? this.diags?.then : this.diags?.otherwise;
    for (const message of messages ?? []) {
      diags.append(el('div', { class: 'diag' }, message));
    }
    box.append(diags);
    return box;
  }

  private async submit(): Promise<void> {
    const gen = generateRuleText(this.draft, this.catalog);
    try {
      await this.api.addRuleText(gen.text);
    } catch (err) {
      if (err instanceof ApiError) {
        this.diags = mapDiagnostics(err.diagnostics, gen);
        if (err.diagnostics.length === 0) {
          this.diags.general.push(err.message);
        }
        this.invalid = true;
        this.renderForm();
        return;
      }
      this.onError(String(err instanceof Error ? err.message : err));
      return;
    }
    this.draft = emptyDraft();
    this.diags = null;
    this.invalid = false;
    this.renderForm();
    this.onChanged();
  }
}
