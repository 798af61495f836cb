import type { GroupsInfo, ItemInfo, ItemPage, RecPayload } from './types.js';

const BASE = '';

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function getJson<T>(path: string, signal?: AbortSignal): Promise<T> {
  const resp = await fetch(BASE + path, { signal });
  const body = await resp.json();
  if (!resp.ok) {
    throw new ApiError(resp.status, body.detail ?? resp.statusText);
  }
  return body as T;
}

export function fetchItems(query: string, page: number, signal?: AbortSignal) {
  const params = new URLSearchParams({ query, page: String(page) });
  return getJson<ItemPage>(`/api/items?${params}`, signal);
}

export function fetchItem(id: number, signal?: AbortSignal) {
  return getJson<ItemInfo>(`/api/items/${id}`, signal);
}

export function fetchRecommendation(
  id: number,
  method: string,
  tau: number,
  signal?: AbortSignal,
) {
  const params = new URLSearchParams({ method, tau: String(tau) });
  return getJson<RecPayload>(`/api/items/${id}/recommend?${params}`, signal);
}

export function fetchGroups(signal?: AbortSignal) {
  return getJson<GroupsInfo>('/api/groups', signal);
}

export function fetchStats(signal?: AbortSignal) {
  return getJson<Record<string, unknown>>('/api/stats', signal);
}
