/** Search-path breadcrumb shown under the user-side list. */

import type { RecPayload } from './types.js';

export interface TraceView {
  nodes: number[];
  length: number;
  accesses: number | 'inf';
  lengthMatchesAccesses: boolean;
  fallback: boolean;
  amortizedCrawl: boolean;
}

export function traceView(payload: RecPayload): TraceView {
  const nodes = payload.trace;
  const accesses = payload.accesses;
  const matches = typeof accesses === 'number' && nodes.length === accesses;
  return {
    nodes,
    length: nodes.length,
    accesses,
    lengthMatchesAccesses: matches,
    fallback: payload.fallback_used,
    // crawl-backed methods report the whole network as cost with a
    // single-node trace; the breadcrumb is not the cost there
    amortizedCrawl: typeof accesses === 'number' && accesses > nodes.length,
  };
}
