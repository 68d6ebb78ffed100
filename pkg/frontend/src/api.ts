// Thin typed client over the service's HTTP contract. Every method maps
// to exactly one endpoint; no client-side state beyond the base URL.

import type {
  Catalog,
  DeviceView,
  Diagnostic,
  ErrorBody,
  RuleJson,
  SimMode,
  WireValue,
} from './types.js';

export class ApiError extends Error {
  readonly status: number;
  readonly diagnostics: Diagnostic[];

  constructor(status: number, message: string, diagnostics?: Diagnostic[]) {
    super(message);
    this.name = 'ApiError';
    this.status = status;
    this.diagnostics = diagnostics ?? [];
  }
}

async function toApiError(resp: Response): Promise<ApiError> {
  let message = `${resp.status} ${resp.statusText}`;
  let diagnostics: Diagnostic[] | undefined;
  try {
    const body = (await resp.json()) as ErrorBody;
    if (body && typeof body.error === 'string') {
      message = body.error;
      diagnostics = body.diagnostics;
    }
  } catch {
    // non-JSON error body; keep the status line
  }
  return new ApiError(resp.status, message, diagnostics);
}

export class ApiClient {
  constructor(readonly base: string = '') {}

  private async request(
    method: string,
    path: string,
    body?: unknown,
    contentType = 'application/json'
  ): Promise<Response> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { 'Content-Type': contentType };
      init.body = typeof body === 'string' ? body : JSON.stringify(body);
    }
    const resp = await fetch(this.base + path, init);
    if (!resp.ok) {
      throw await toApiError(resp);
    }
    return resp;
  }

  private async json<T>(
    method: string,
    path: string,
    body?: unknown
  ): Promise<T> {
    const resp = await this.request(method, path, body);
    return (await resp.json()) as T;
  }

  listRules(): Promise<RuleJson[]> {
    return this.json('GET', '/rules');
  }

  /** Submit rule text; the server parses and checks it before adding. */
  addRuleText(text: string): Promise<{ ids: string[]; id: string }> {
    return this.request('POST', '/rules', text, 'text/plain').then(
      (r) => r.json() as Promise<{ ids: string[]; id: string }>
    );
  }

  deleteRule(id: string): Promise<{ ok: boolean; removed: string }> {
    return this.json('DELETE', `/rules/${encodeURIComponent(id)}`);
  }

  setRuleEnabled(id: string, enabled: boolean): Promise<unknown> {
    return this.json('PUT', `/rules/${encodeURIComponent(id)}/enabled`, {
      enabled,
    });
  }

  catalog(): Promise<Catalog> {
    return this.json('GET', '/catalog');
  }

  device(): Promise<DeviceView> {
    return this.json('GET', '/device');
  }

  override(setting: string, value: unknown): Promise<DeviceView> {
    return this.json('POST', '/device/override', { setting, value });
  }

  clearOverride(setting: string): Promise<DeviceView> {
    return this.json('POST', '/device/override/clear', { setting });
  }

  sendEvent(factor: string, value: WireValue, t?: number): Promise<unknown> {
    const body: Record<string, unknown> = { factor, value };
    if (t !== undefined) {
      body.t = t;
    }
    return this.json('POST', '/context/events', body);
  }

  /** Advance one tick. The report itself arrives on the event stream. */
  async step(): Promise<string> {
    const resp = await this.request('POST', '/sim/step');
    return resp.text();
  }

  getMode(): Promise<SimMode> {
    return this.json('GET', '/sim/mode');
  }

  setMode(mode: 'stepped' | 'live'): Promise<SimMode> {
    return this.json('POST', '/sim/mode', { mode });
  }
}
