export interface ItemInfo {
  id: number;
  title: string;
  group: number;
  group_name: string;
  year?: number;
  label?: string;
}

export interface RecPayload {
  list: number[];
  accesses: number | 'inf';
  group_counts: Record<string, number>;
  trace: number[];
  fallback_used: boolean;
  source: number;
  method: string;
  k: number;
  tau: number;
}

export interface GroupsInfo {
  rule: { kind: string; threshold: number | null; column: string | null } | null;
  n_groups: number;
  counts: Record<string, number>;
}

export interface ItemPage {
  total: number;
  page: number;
  items: ItemInfo[];
}
