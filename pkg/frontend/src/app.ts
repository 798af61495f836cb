/** DOM wiring for the explorer: browse items, compare the provider's page
 * with a user-side method side by side, steer the fairness floor with the
 * tau slider, and follow recommendations by clicking them. */

import { ApiError, fetchGroups, fetchItem, fetchItems, fetchRecommendation } from './api.js';
import { badgeCounts, badgesMatchApi, diffLists } from './compare.js';
import { clampTau, maxTau, navigateTo, stateFromQuery, stateToQuery, ViewState } from './state.js';
import { traceView } from './trace.js';
import type { ItemInfo, RecPayload } from './types.js';

const itemCache = new Map<number, ItemInfo>();
let state: ViewState;
let inflight: AbortController | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

async function itemInfo(id: number, signal?: AbortSignal): Promise<ItemInfo> {
  const hit = itemCache.get(id);
  if (hit) return hit;
  const info = await fetchItem(id, signal);
  itemCache.set(id, info);
  return info;
}

function setError(message: string | null): void {
  const banner = el<HTMLDivElement>('error');
  banner.textContent = message ?? '';
  banner.style.display = message ? 'block' : 'none';
}

function renderBadges(target: HTMLElement, badges: Record<string, number>): void {
  target.innerHTML = '';
  for (const [name, count] of Object.entries(badges).sort()) {
    const badge = document.createElement('span');
    badge.className = 'badge';
    badge.textContent = `${name}: ${count}`;
    target.appendChild(badge);
  }
}

async function renderList(
  target: HTMLElement,
  badgeTarget: HTMLElement,
  payload: RecPayload,
  highlight: Set<number>,
  signal: AbortSignal,
): Promise<void> {
  const infos = await Promise.all(payload.list.map((id) => itemInfo(id, signal)));
  const badges = badgeCounts(payload.list, (id) => itemCache.get(id)?.group_name ?? '?');
  if (!badgesMatchApi(badges, payload.group_counts)) {
    throw new Error('group badges disagree with the API response');
  }
  target.innerHTML = '';
  for (const info of infos) {
    const row = document.createElement('li');
    row.className = highlight.has(info.id) ? 'rec diff' : 'rec';
    const link = document.createElement('a');
    link.href = '#';
    link.textContent = `${info.title} [${info.group_name}]`;
    link.addEventListener('click', (ev) => {
      ev.preventDefault();
      void selectItem(info.id);
    });
    row.appendChild(link);
    target.appendChild(row);
  }
  renderBadges(badgeTarget, badges);
}

function renderTrace(payload: RecPayload): void {
  const view = traceView(payload);
  const target = el<HTMLDivElement>('trace');
  const parts = view.nodes.map((node) => itemCache.get(node)?.title ?? `#${node}`);
  let text = parts.join(' → ');
  if (view.amortizedCrawl) text += ' (full crawl amortized)';
  target.textContent = text;
  el<HTMLSpanElement>('fallback-badge').style.display = view.fallback
    ? 'inline'
    : 'none';
}

async function refreshComparison(): Promise<void> {
  if (state.item === null) return;
  inflight?.abort();
  inflight = new AbortController();
  const { signal } = inflight;
  setError(null);
  try {
    const [provider, userSide] = await Promise.all([
      fetchRecommendation(state.item, 'provider', 0, signal),
      fetchRecommendation(state.item, state.method, state.tau, signal),
    ]);
    const diff = diffLists(provider.list, userSide.list);
    const source = await itemInfo(state.item, signal);
    el<HTMLHeadingElement>('source-title').textContent =
      `${source.title} [${source.group_name}]`;
    await renderList(el('provider-list'), el('provider-badges'), provider,
                     diff.onlyProvider, signal);
    await renderList(el('userside-list'), el('userside-badges'), userSide,
                     diff.onlyUserSide, signal);
    el<HTMLSpanElement>('access-counter').textContent = String(userSide.accesses);
    el<HTMLSpanElement>('diff-counter').textContent =
      String(diff.onlyProvider.size + diff.onlyUserSide.size);
    renderTrace(userSide);
    history.replaceState(null, '', `?${stateToQuery(state)}`);
  } catch (err) {
    if ((err as Error).name === 'AbortError') return;
    if (err instanceof ApiError && err.status === 422) {
      setError(`infeasible fairness floor: ${err.detail}`);
    } else {
      setError(String(err));
    }
  }
}

async function selectItem(id: number): Promise<void> {
  state = navigateTo(state, id);
  await refreshComparison();
}

async function runSearch(): Promise<void> {
  const query = el<HTMLInputElement>('search').value;
  const body = await fetchItems(query, 1);
  const target = el<HTMLUListElement>('results');
  target.innerHTML = '';
  for (const info of body.items) {
    itemCache.set(info.id, info);
    const row = document.createElement('li');
    const link = document.createElement('a');
    link.href = '#';
    link.textContent = `${info.title} [${info.group_name}]`;
    link.addEventListener('click', (ev) => {
      ev.preventDefault();
      void selectItem(info.id);
    });
    row.appendChild(link);
    target.appendChild(row);
  }
}

export async function start(): Promise<void> {
  const groups = await fetchGroups();
  state = stateFromQuery(location.search, 10, groups.n_groups);
  const slider = el<HTMLInputElement>('tau');
  slider.max = String(maxTau(state.k, groups.n_groups));
  slider.value = String(state.tau);
  el<HTMLSpanElement>('tau-value').textContent = String(state.tau);
  slider.addEventListener('input', () => {
    state.tau = clampTau(parseInt(slider.value, 10), state.k, groups.n_groups);
    el<HTMLSpanElement>('tau-value').textContent = String(state.tau);
    void refreshComparison();
  });
  const method = el<HTMLSelectElement>('method');
  method.value = state.method;
  method.addEventListener('change', () => {
    state.method = method.value;
    void refreshComparison();
  });
  el<HTMLInputElement>('search').addEventListener('input', () => void runSearch());
  await runSearch();
  if (state.item !== null) await refreshComparison();
}

if (typeof document !== 'undefined' && document.getElementById('explorer')) {
  void start();
}
