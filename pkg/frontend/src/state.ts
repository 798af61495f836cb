/** View state lives in the URL so comparisons are shareable. */

export interface ViewState {
  item: number | null;
  method: string;
  tau: number;
  k: number;
  nGroups: number;
  history: number[]; // navigation trail, newest last
}

export const USER_SIDE_METHODS = ['consul', 'privatewalk', 'privaterank', 'pp'];

export function defaultState(k = 10, nGroups = 2): ViewState {
  return { item: null, method: 'consul', tau: 0, k, nGroups, history: [] };
}

/** The slider is clamped so an infeasible tau can never be requested. */
export function maxTau(k: number, nGroups: number): number {
  return Math.floor(k / Math.max(nGroups, 1));
}

export function clampTau(tau: number, k: number, nGroups: number): number {
  return Math.max(0, Math.min(Math.floor(tau), maxTau(k, nGroups)));
}

/** Clicking a recommended item makes it the new source and records the trail. */
export function navigateTo(state: ViewState, item: number): ViewState {
  const history = state.item === null ? state.history : [...state.history, state.item];
  return { ...state, item, history };
}

export function goBack(state: ViewState): ViewState {
  if (state.history.length === 0) return state;
  const history = state.history.slice(0, -1);
  return { ...state, item: state.history[state.history.length - 1], history };
}

export function stateToQuery(state: ViewState): string {
  const params = new URLSearchParams();
  if (state.item !== null) params.set('item', String(state.item));
  params.set('method', state.method);
  params.set('tau', String(state.tau));
  params.set('k', String(state.k));
  return params.toString();
}

export function stateFromQuery(query: string, k = 10, nGroups = 2): ViewState {
  const params = new URLSearchParams(query);
  const state = defaultState(k, nGroups);
  const item = params.get('item');
  if (item !== null && /^\d+$/.test(item)) state.item = parseInt(item, 10);
  const method = params.get('method');
  if (method && USER_SIDE_METHODS.includes(method)) state.method = method;
  const kParam = params.get('k');
  if (kParam && /^\d+$/.test(kParam)) state.k = parseInt(kParam, 10);
  const tau = params.get('tau');
  if (tau && /^\d+$/.test(tau)) state.tau = clampTau(parseInt(tau, 10), state.k, nGroups);
  return state;
}
