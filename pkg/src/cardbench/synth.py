"""Seeded synthetic forum-style dataset: 8 tables, 12 join edges.

The shape mirrors a two-hub user/post schema (members, submissions, and
six satellite activity tables) with skewed key popularity, correlated
attribute pairs, and sprinkled nulls, so histogram-style estimators
misfire in interesting ways while everything stays desk-scale. Scale
parameter is the member count; the largest table grows to roughly six
times that.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .catalog import Catalog, build_catalog, build_table

SCHEMA_TEXT = """\
# synthetic forum dataset: 8 tables, 12 join edges
table users
  column id categorical
  column reputation continuous
  column age continuous
  column profile_views continuous
table posts
  column id categorical
  column owner_user_id categorical
  column score continuous
  column view_count continuous
  column post_type categorical
table comments
  column post_id categorical
  column user_id categorical
  column score continuous
  column flagged categorical
table badges
  column user_id categorical
  column badge_class categorical
  column year continuous
table votes
  column post_id categorical
  column user_id categorical
  column vote_type categorical
  column bounty continuous
table post_history
  column post_id categorical
  column user_id categorical
  column change_kind categorical
  column text_length continuous
table post_links
  column post_id categorical
  column related_post_id categorical
  column link_type categorical
table tags
  column excerpt_post_id categorical
  column usage_count continuous

join posts.owner_user_id = users.id pkfk
join comments.post_id = posts.id pkfk
join comments.user_id = users.id pkfk
join badges.user_id = users.id pkfk
join votes.post_id = posts.id pkfk
join votes.user_id = users.id pkfk
join post_history.post_id = posts.id pkfk
join post_history.user_id = users.id pkfk
join post_links.post_id = posts.id pkfk
join post_links.related_post_id = posts.id pkfk
join tags.excerpt_post_id = posts.id pkfk
join votes.user_id = badges.user_id fkfk
"""


def _zipf_keys(rng, ids: np.ndarray, size: int, a: float = 1.3) -> np.ndarray:
    """Skewed draw over existing ids: low ranks are heavily favored."""
    ranks = np.minimum(rng.zipf(a, size=size), len(ids)) - 1
    return ids[ranks]


def _with_nulls(rng, values: list, rate: float) -> list:
    return [None if rng.random() < rate else v for v in values]


def synth_tables(seed: int = 0, scale: int = 600) -> dict[str, list]:
    """Raw per-table column data; values are plain Python lists."""
    rng = np.random.default_rng(seed)
    n_users = scale
    n_posts = 2 * scale
    n_comments = 4 * scale
    n_badges = int(1.5 * scale)
    n_votes = 3 * scale
    n_history = int(2.5 * scale)
    n_links = scale
    n_tags = max(1, scale // 2)

    user_ids = np.arange(1, n_users + 1)
    reputation = np.round(rng.zipf(1.4, size=n_users).astype(float), 0)
    age = np.round(rng.normal(35, 12, size=n_users).clip(13, 90), 0)
    # correlated with reputation: heavy users get viewed
    views = np.round(reputation * rng.uniform(0.5, 2.0, size=n_users)
                     + rng.exponential(5, size=n_users), 0)

    post_ids = np.arange(1, n_posts + 1)
    owners = _zipf_keys(rng, user_ids, n_posts)
    score = np.round(rng.zipf(1.6, size=n_posts).astype(float) - 1, 0)
    view_count = np.round(score * rng.uniform(5, 15, size=n_posts)
                          + rng.exponential(20, size=n_posts), 0)
    post_type = rng.choice([1, 1, 1, 2, 2, 3], size=n_posts)

    def post_keys(size):
        return _zipf_keys(rng, post_ids, size)

    comment_posts = post_keys(n_comments)
    comment_users = _zipf_keys(rng, user_ids, n_comments)
    comment_score = np.round(rng.zipf(2.0, size=n_comments).astype(float) - 1, 0)
    flagged = (rng.random(n_comments) < 0.08).astype(int)

    badge_users = _zipf_keys(rng, user_ids, n_badges)
    badge_class = rng.choice([1, 2, 2, 3, 3, 3], size=n_badges)
    badge_year = 2008 + (badge_users % 7) + rng.integers(0, 3, size=n_badges)

    vote_posts = post_keys(n_votes)
    vote_users = _zipf_keys(rng, user_ids, n_votes)
    vote_type = np.minimum(rng.zipf(1.8, size=n_votes), 8)
    bounty = np.round(rng.exponential(40, size=n_votes), 0)

    hist_posts = post_keys(n_history)
    hist_users = _zipf_keys(rng, user_ids, n_history)
    change_kind = np.minimum(rng.zipf(1.5, size=n_history), 12)
    text_length = np.round(rng.lognormal(4.0, 1.0, size=n_history), 0)

    link_posts = post_keys(n_links)
    link_related = post_keys(n_links)
    link_type = rng.choice([1, 1, 1, 2], size=n_links)

    tag_posts = post_keys(n_tags)
    usage = np.round(rng.zipf(1.3, size=n_tags).astype(float), 0)

    return {
        "users": [
            ("id", "categorical", user_ids.tolist()),
            ("reputation", "continuous", reputation.tolist()),
            ("age", "continuous", _with_nulls(rng, age.tolist(), 0.03)),
            ("profile_views", "continuous", views.tolist()),
        ],
        "posts": [
            ("id", "categorical", post_ids.tolist()),
            ("owner_user_id", "categorical", _with_nulls(rng, owners.tolist(), 0.05)),
            ("score", "continuous", score.tolist()),
            ("view_count", "continuous", view_count.tolist()),
            ("post_type", "categorical", post_type.tolist()),
        ],
        "comments": [
            ("post_id", "categorical", comment_posts.tolist()),
            ("user_id", "categorical", _with_nulls(rng, comment_users.tolist(), 0.04)),
            ("score", "continuous", comment_score.tolist()),
            ("flagged", "categorical", flagged.tolist()),
        ],
        "badges": [
            ("user_id", "categorical", badge_users.tolist()),
            ("badge_class", "categorical", badge_class.tolist()),
            ("year", "continuous", badge_year.tolist()),
        ],
        "votes": [
            ("post_id", "categorical", vote_posts.tolist()),
            ("user_id", "categorical", _with_nulls(rng, vote_users.tolist(), 0.10)),
            ("vote_type", "categorical", vote_type.tolist()),
            ("bounty", "continuous", _with_nulls(rng, bounty.tolist(), 0.30)),
        ],
        "post_history": [
            ("post_id", "categorical", hist_posts.tolist()),
            ("user_id", "categorical", hist_users.tolist()),
            ("change_kind", "categorical", change_kind.tolist()),
            ("text_length", "continuous", text_length.tolist()),
        ],
        "post_links": [
            ("post_id", "categorical", link_posts.tolist()),
            ("related_post_id", "categorical", link_related.tolist()),
            ("link_type", "categorical", link_type.tolist()),
        ],
        "tags": [
            ("excerpt_post_id", "categorical", tag_posts.tolist()),
            ("usage_count", "continuous", usage.tolist()),
        ],
    }


_EDGES = [
    ("posts", "owner_user_id", "users", "id", "pkfk"),
    ("comments", "post_id", "posts", "id", "pkfk"),
    ("comments", "user_id", "users", "id", "pkfk"),
    ("badges", "user_id", "users", "id", "pkfk"),
    ("votes", "post_id", "posts", "id", "pkfk"),
    ("votes", "user_id", "users", "id", "pkfk"),
    ("post_history", "post_id", "posts", "id", "pkfk"),
    ("post_history", "user_id", "users", "id", "pkfk"),
    ("post_links", "post_id", "posts", "id", "pkfk"),
    ("post_links", "related_post_id", "posts", "id", "pkfk"),
    ("tags", "excerpt_post_id", "posts", "id", "pkfk"),
    ("votes", "user_id", "badges", "user_id", "fkfk"),
]


def make_catalog(seed: int = 0, scale: int = 600) -> Catalog:
    data = synth_tables(seed=seed, scale=scale)
    tables = [build_table(name, cols) for name, cols in data.items()]
    return build_catalog(tables, _EDGES)


def write_dataset(out_dir, seed: int = 0, scale: int = 600) -> Path:
    """Write schema.txt plus one CSV per table; returns the schema path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    schema_path = out / "schema.txt"
    schema_path.write_text(SCHEMA_TEXT, encoding="utf-8")
    data = synth_tables(seed=seed, scale=scale)
    for name, cols in data.items():
        with open(out / f"{name}.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow([c for c, _, _ in cols])
            columns = [vals for _, _, vals in cols]
            for row in zip(*columns):
                writer.writerow(["" if v is None else _csv_value(v) for v in row])
    return schema_path


def _csv_value(v) -> str:
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    return str(v)
