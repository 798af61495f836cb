import { describe, expect, it } from 'vitest';

import {
  badgeCounts,
  badgesMatchApi,
  diffLists,
  highlightedCount,
} from '../src/compare.js';

const groupOf = (id: number) => (id % 2 === 0 ? 'protected' : 'other');

describe('diffLists', () => {
  it('identical lists produce zero highlighted differences', () => {
    const diff = diffLists([3, 1, 4, 1], [3, 1, 4, 1]);
    expect(highlightedCount(diff)).toBe(0);
    expect(diff.common).toEqual(new Set([3, 1, 4]));
  });

  it('reordered but equal sets still show no differences', () => {
    const diff = diffLists([1, 2, 3], [3, 2, 1]);
    expect(highlightedCount(diff)).toBe(0);
  });

  it('marks items unique to each side', () => {
    const diff = diffLists([1, 2, 3, 4], [1, 2, 7, 8]);
    expect(diff.onlyProvider).toEqual(new Set([3, 4]));
    expect(diff.onlyUserSide).toEqual(new Set([7, 8]));
    expect(highlightedCount(diff)).toBe(4);
  });
});

describe('badgeCounts', () => {
  it('derives counts from the displayed list itself', () => {
    expect(badgeCounts([1, 2, 3, 4], groupOf)).toEqual({
      other: 2,
      protected: 2,
    });
  });

  it('balanced quota shows tau per group when tau = k / groups', () => {
    // k = 6, two groups, tau = 3: a sound list carries exactly 3 + 3
    const badges = badgeCounts([2, 4, 6, 1, 3, 5], groupOf);
    expect(badges).toEqual({ protected: 3, other: 3 });
    expect(Object.values(badges).every((v) => v === 3)).toBe(true);
  });
});

describe('badgesMatchApi', () => {
  it('accepts equal counting', () => {
    expect(
      badgesMatchApi({ other: 2, protected: 2 }, { protected: 2, other: 2 }),
    ).toBe(true);
  });

  it('rejects any discrepancy with the API field', () => {
    expect(badgesMatchApi({ other: 3 }, { other: 2 })).toBe(false);
    expect(badgesMatchApi({ other: 2 }, { other: 2, protected: 1 })).toBe(false);
  });

  it('treats absent groups as zero on both sides', () => {
    expect(badgesMatchApi({ other: 1, protected: 0 }, { other: 1 })).toBe(true);
  });
});
