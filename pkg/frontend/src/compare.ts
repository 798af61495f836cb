/** Side-by-side comparison logic: shared items stay neutral, differences
 * are highlighted, and group badges are recomputed from the list actually
 * displayed, then cross-checked against the counts the API reported. */

export interface ListDiff {
  common: Set<number>;
  onlyProvider: Set<number>;
  onlyUserSide: Set<number>;
}

export function diffLists(provider: number[], userSide: number[]): ListDiff {
  const p = new Set(provider);
  const u = new Set(userSide);
  const common = new Set<number>();
  const onlyProvider = new Set<number>();
  const onlyUserSide = new Set<number>();
  for (const id of p) (u.has(id) ? common : onlyProvider).add(id);
  for (const id of u) if (!p.has(id)) onlyUserSide.add(id);
  return { common, onlyProvider, onlyUserSide };
}

export function highlightedCount(diff: ListDiff): number {
  return diff.onlyProvider.size + diff.onlyUserSide.size;
}

/** Badges derive from the displayed list itself, never from the API field. */
export function badgeCounts(
  items: number[],
  groupNameOf: (id: number) => string,
): Record<string, number> {
  const counts: Record<string, number> = {};
  for (const id of items) {
    const name = groupNameOf(id);
    counts[name] = (counts[name] ?? 0) + 1;
  }
  return counts;
}

/** The UI refuses to render a list whose badges disagree with the API. */
export function badgesMatchApi(
  badges: Record<string, number>,
  apiCounts: Record<string, number>,
): boolean {
  const names = new Set([...Object.keys(badges), ...Object.keys(apiCounts)]);
  for (const name of names) {
    if ((badges[name] ?? 0) !== (apiCounts[name] ?? 0)) return false;
  }
  return true;
}

