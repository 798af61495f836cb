"""Synthetic dataset generators in the public file formats.

Desk-scale stand-ins for the benchmark datasets: a MovieLens-100k-layout
corpus (943 users, 1682 movies, ~100k ratings) and a census-format table.
Geometry is planted so that k-NN providers and factorization models find
real structure to exploit.
"""

from __future__ import annotations

import os

import numpy as np

N_ML_USERS = 943
N_ML_ITEMS = 1682
N_ML_RATINGS = 100_000
_GENRES = 8


def synthesize_movielens(directory, n_users: int = N_ML_USERS,
                         n_items: int = N_ML_ITEMS,
                         n_ratings: int = N_ML_RATINGS,
                         seed: int = 0) -> None:
    """Write ``u.data`` and ``u.item`` with clustered taste structure.

    Items live in a latent 2-D taste space with genre clusters and Zipf
    popularity; users sample items near their own taste position. Release
    years correlate loosely with genre so both the "old movie" and the
    "unpopular movie" protected groups are non-trivial and reachable.
    """
    rng = np.random.default_rng(seed)
    os.makedirs(directory, exist_ok=True)

    genre = rng.integers(0, _GENRES, size=n_items)
    centers = 3.0 * rng.standard_normal((_GENRES, 2))
    item_pos = centers[genre] + rng.standard_normal((n_items, 2))
    popularity = rng.zipf(1.4, size=n_items).astype(np.float64)
    popularity = np.clip(popularity, 1, 200)

    # release years are only loosely tied to taste clusters: every
    # neighbourhood carries a share of older titles
    old = rng.random(n_items) < 0.3
    years = np.where(old, rng.integers(1955, 1990, size=n_items),
                     rng.integers(1990, 1999, size=n_items))

    user_pos = centers[rng.integers(0, _GENRES, size=n_users)] \
        + 1.2 * rng.standard_normal((n_users, 2))
    per_user = rng.multinomial(n_ratings - 2 * n_users,
                               np.full(n_users, 1.0 / n_users)) + 2

    rows: list[tuple[int, int, int, int]] = []
    seen_per_item = np.zeros(n_items, dtype=int)
    for u in range(n_users):
        diff = item_pos - user_pos[u]
        affinity = -0.5 * np.einsum("ij,ij->i", diff, diff)
        weights = np.exp(affinity) * popularity
        weights /= weights.sum()
        count = min(per_user[u], n_items)
        chosen = rng.choice(n_items, size=count, replace=False, p=weights)
        stamps = rng.integers(874_000_000, 893_000_000, size=count)
        ratings = rng.integers(3, 6, size=count)
        seen_per_item[chosen] += 1
        rows.extend((u + 1, int(item) + 1, int(rating), int(stamp))
                    for item, stamp, rating in zip(chosen, stamps, ratings))
    # every item needs a few interactions to survive a leave-latest-out split
    for item in np.flatnonzero(seen_per_item < 3):
        for u in rng.choice(n_users, size=3 - seen_per_item[item], replace=False):
            rows.append((int(u) + 1, int(item) + 1, 4,
                         int(rng.integers(874_000_000, 893_000_000))))
    with open(os.path.join(directory, "u.data"), "w", encoding="utf-8") as fh:
        for user, item, rating, stamp in rows:
            fh.write(f"{user}\t{item}\t{rating}\t{stamp}\n")

    with open(os.path.join(directory, "u.item"), "w", encoding="latin-1") as fh:
        for i in range(n_items):
            title = f"Movie {i + 1:04d} ({years[i]})"
            date = f"01-Jan-{years[i]}"
            flags = "|".join("1" if g == genre[i] else "0" for g in range(19))
            fh.write(f"{i + 1}|{title}|{date}||http://example.com/{i + 1}|{flags}\n")


_EDUCATION = (
    ("HS-grad", 9), ("Some-college", 10), ("Bachelors", 13),
    ("Masters", 14), ("Assoc-voc", 11), ("11th", 7), ("Doctorate", 16),
)


def synthesize_adult(path, n_rows: int = 2000, seed: int = 0,
                     clip_max: int = 99_999) -> None:
    """Write a census-format CSV with clipped capital-gain extremes.

    Ages and log-gains are correlated so that the two-feature geometry has
    recoverable shape; a slice of rows sits exactly at the clip boundaries
    (0 and ``clip_max``) the way clipped extracts do.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(n_rows):
        age = int(np.clip(rng.normal(42, 13), 17, 90))
        u = rng.random()
        if u < 0.08:
            gain = 0  # column minimum: dropped by the provider pipeline
        elif u < 0.11:
            gain = clip_max  # clipped maximum: dropped as well
        else:
            gain = int(np.clip(np.exp(rng.normal(7.2 + 0.02 * (age - 42), 1.1)),
                               120, clip_max - 1))
        edu, edu_num = _EDUCATION[rng.integers(0, len(_EDUCATION))]
        sex = "Male" if rng.random() < 0.55 else "Female"
        income = ">50K" if rng.random() < 1 / (1 + np.exp(-(np.log1p(gain) - 7.5))) \
            else "<=50K"
        rows.append(
            f"{age}, Private, {rng.integers(10_000, 400_000)}, {edu}, {edu_num}, "
            f"Never-married, Prof-specialty, Not-in-family, White, {sex}, "
            f"{gain}, 0, {rng.integers(20, 60)}, United-States, {income}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(rows) + "\n")


def gaussian_mixture(n: int, seed: int = 0, scale: float = 1.6) -> np.ndarray:
    """2-D three-component mixture used by the recovery experiments."""
    rng = np.random.default_rng(seed)
    means = scale * np.array([[0.0, 0.0], [3.0, 1.0], [1.5, 3.0]])
    comp = rng.integers(0, 3, size=n)
    return means[comp] + rng.standard_normal((n, 2))
