// Timeline rows, one per tick report received on the stream.

import type { TickReport, Truth } from './types.js';

export interface TimelineRowModel {
  time: number;
  truths: { id: string; truth: Truth }[];
  firings: string[];
  fired: boolean;
}

export function rowModel(report: TickReport): TimelineRowModel {
  const truths = Object.entries(report.rules).map(([id, truth]) => ({
    id,
    truth,
  }));
  const firings = report.firings.map((f) => `${f.source}: ${f.trigger}`);
  return {
    time: report.tick_time,
    truths,
    firings,
    fired: report.firings.length > 0,
  };
}

/** Rule ids credited with at least one firing in this report. */
export function firedRuleIds(report: TickReport): Set<string> {
  const ids = new Set<string>();
  for (const f of report.firings) {
    const slash = f.source.indexOf('/');
    ids.add(slash >= 0 ? f.source.slice(0, slash) : f.source);
  }
  return ids;
}
