"""Embedded store for trails and their reviews.

SQLite (single file, or in-memory for tests) behind a small interface.
Filter execution compiles the validated DSL AST to parameterized SQL, so
the query text a model produced never reaches the database unparsed.
"""

from __future__ import annotations

import json
import sqlite3
import threading
from dataclasses import dataclass, replace

from .errors import NotFoundError, ValidationError
from .filter_dsl import (
    ACTIVITIES,
    DIFFICULTIES,
    TRISTATE,
    And,
    Comparison,
    FilterExpr,
    Has,
    MatchAll,
    Node,
    Not,
    Or,
)


@dataclass(frozen=True)
class TrailRecord:
    id: str
    name: str
    town: str
    length_miles: float
    difficulty: str
    activities: frozenset[str]
    pets_allowed: str = "unknown"
    wheelchair_accessible: str = "unknown"
    description: str = ""

    def validate(self) -> None:
        if not self.name.strip():
            raise ValidationError("trail name must be non-empty")
        if not self.length_miles > 0:
            raise ValidationError(f"length_miles must be > 0, got {self.length_miles}")
        if self.difficulty not in DIFFICULTIES:
            raise ValidationError(f"unknown difficulty {self.difficulty!r}")
        if not self.activities:
            raise ValidationError("activities must be non-empty")
        unknown = self.activities - set(ACTIVITIES)
        if unknown:
            raise ValidationError(f"unknown activities {sorted(unknown)}")
        for tri_field in ("pets_allowed", "wheelchair_accessible"):
            if getattr(self, tri_field) not in TRISTATE:
                raise ValidationError(
                    f"{tri_field} must be one of {TRISTATE}, got {getattr(self, tri_field)!r}"
                )


@dataclass(frozen=True)
class Review:
    id: str
    trail_id: str
    source: str
    text: str
    fetched_at: str | None = None


_TRAIL_COLUMNS = (
    "id, name, town, length_miles, difficulty, activities, "
    "pets_allowed, wheelchair_accessible, description"
)


def _row_to_trail(row: sqlite3.Row) -> TrailRecord:
    return TrailRecord(
        id=row["id"],
        name=row["name"],
        town=row["town"],
        length_miles=row["length_miles"],
        difficulty=row["difficulty"],
        activities=frozenset(json.loads(row["activities"])),
        pets_allowed=row["pets_allowed"],
        wheelchair_accessible=row["wheelchair_accessible"],
        description=row["description"],
    )


def _compile_node(node: Node, params: list) -> str:
    if isinstance(node, MatchAll):
        return "1=1"
    if isinstance(node, Comparison):
        op = "<>" if node.op == "!=" else node.op
        params.append(node.value)
        return f"{node.field} {op} ?"
    if isinstance(node, Has):
        params.append(node.value)
        return (
            "EXISTS (SELECT 1 FROM json_each(trails.activities) "
            "WHERE json_each.value = ?)"
        )
    if isinstance(node, Not):
        return f"NOT ({_compile_node(node.inner, params)})"
    if isinstance(node, And):
        return " AND ".join(f"({_compile_node(p, params)})" for p in node.parts)
    if isinstance(node, Or):
        return " OR ".join(f"({_compile_node(p, params)})" for p in node.parts)
    raise TypeError(f"unknown node {node!r}")


class TrailStore:
    """Many concurrent readers, single writer; writes atomic per record."""

    def __init__(self, path: str = ":memory:"):
        self._conn = sqlite3.connect(path, check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        self._lock = threading.RLock()
        with self._lock, self._conn:
            self._conn.executescript(
                """
                CREATE TABLE IF NOT EXISTS trails (
                    id TEXT PRIMARY KEY,
                    name TEXT NOT NULL UNIQUE,
                    town TEXT NOT NULL,
                    length_miles REAL NOT NULL,
                    difficulty TEXT NOT NULL,
                    activities TEXT NOT NULL,
                    pets_allowed TEXT NOT NULL,
                    wheelchair_accessible TEXT NOT NULL,
                    description TEXT NOT NULL
                );
                CREATE TABLE IF NOT EXISTS reviews (
                    id TEXT PRIMARY KEY,
                    trail_id TEXT NOT NULL REFERENCES trails(id),
                    source TEXT NOT NULL,
                    text TEXT NOT NULL,
                    fetched_at TEXT
                );
                CREATE INDEX IF NOT EXISTS reviews_by_trail ON reviews(trail_id, id);
                """
            )

    def close(self) -> None:
        self._conn.close()

    # -- trails ------------------------------------------------------------

    def upsert_trail(self, trail: TrailRecord) -> str:
        """Insert or, matching by name, replace a trail. Returns its key.

        An upsert over an existing name keeps the stored id so reviews stay
        attached.
        """
        trail.validate()
        with self._lock, self._conn:
            row = self._conn.execute(
                "SELECT id FROM trails WHERE name = ?", (trail.name,)
            ).fetchone()
            if row is not None:
                trail = replace(trail, id=row["id"])
            self._conn.execute(
                "INSERT OR REPLACE INTO trails VALUES (?,?,?,?,?,?,?,?,?)",
                (
                    trail.id,
                    trail.name,
                    trail.town,
                    trail.length_miles,
                    trail.difficulty,
                    json.dumps(sorted(trail.activities)),
                    trail.pets_allowed,
                    trail.wheelchair_accessible,
                    trail.description,
                ),
            )
            return trail.id

    def get_trail(self, trail_id: str) -> TrailRecord:
        with self._lock:
            row = self._conn.execute(
                f"SELECT {_TRAIL_COLUMNS} FROM trails WHERE id = ?", (trail_id,)
            ).fetchone()
        if row is None:
            raise NotFoundError(f"no trail with id {trail_id!r}")
        return _row_to_trail(row)

    def get_trail_by_name(self, name: str) -> TrailRecord | None:
        """Exact name lookup, case-insensitive."""
        with self._lock:
            row = self._conn.execute(
                f"SELECT {_TRAIL_COLUMNS} FROM trails WHERE name = ? COLLATE NOCASE",
                (name,),
            ).fetchone()
        return None if row is None else _row_to_trail(row)

    def list_trails(self) -> list[TrailRecord]:
        with self._lock:
            rows = self._conn.execute(
                f"SELECT {_TRAIL_COLUMNS} FROM trails ORDER BY name"
            ).fetchall()
        return [_row_to_trail(r) for r in rows]

    def delete_trail(self, trail_id: str) -> None:
        """Refused while the trail still has reviews (referential integrity)."""
        with self._lock, self._conn:
            count = self._conn.execute(
                "SELECT COUNT(*) FROM reviews WHERE trail_id = ?", (trail_id,)
            ).fetchone()[0]
            if count:
                raise ValidationError(
                    f"trail {trail_id!r} still has {count} reviews; delete them first"
                )
            cur = self._conn.execute("DELETE FROM trails WHERE id = ?", (trail_id,))
            if cur.rowcount == 0:
                raise NotFoundError(f"no trail with id {trail_id!r}")

    def trail_count(self) -> int:
        with self._lock:
            return self._conn.execute("SELECT COUNT(*) FROM trails").fetchone()[0]

    def exec_filter(self, expr: FilterExpr) -> list[TrailRecord]:
        """All trails satisfying the expression, ordered and truncated.

        Ties (and the no-ORDER-BY case) fall back to ascending name.
        """
        params: list = []
        where = _compile_node(expr.where, params)
        order = "name ASC"
        if expr.order_by is not None:
            order_field, direction = expr.order_by
            order = f"{order_field} {direction.upper()}, name ASC"
        sql = f"SELECT {_TRAIL_COLUMNS} FROM trails WHERE {where} ORDER BY {order}"
        if expr.limit is not None:
            sql += " LIMIT ?"
            params.append(expr.limit)
        with self._lock:
            rows = self._conn.execute(sql, params).fetchall()
        return [_row_to_trail(r) for r in rows]

    # -- reviews -----------------------------------------------------------

    def add_review(self, review: Review) -> str:
        with self._lock, self._conn:
            exists = self._conn.execute(
                "SELECT 1 FROM trails WHERE id = ?", (review.trail_id,)
            ).fetchone()
            if exists is None:
                raise ValidationError(
                    f"review {review.id!r} references missing trail {review.trail_id!r}"
                )
            self._conn.execute(
                "INSERT INTO reviews VALUES (?,?,?,?,?)",
                (review.id, review.trail_id, review.source, review.text, review.fetched_at),
            )
            return review.id

    def get_review(self, review_id: str) -> Review:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM reviews WHERE id = ?", (review_id,)
            ).fetchone()
        if row is None:
            raise NotFoundError(f"no review with id {review_id!r}")
        return Review(**{k: row[k] for k in row.keys()})

    def reviews_for_trail(self, trail_id: str) -> list[Review]:
        """All reviews of one trail in ascending id order."""
        self.get_trail(trail_id)  # not-found check
        with self._lock:
            rows = self._conn.execute(
                "SELECT * FROM reviews WHERE trail_id = ? ORDER BY id", (trail_id,)
            ).fetchall()
        return [Review(**{k: r[k] for k in r.keys()}) for r in rows]

    def review_count(self) -> int:
        with self._lock:
            return self._conn.execute("SELECT COUNT(*) FROM reviews").fetchone()[0]

    def next_review_id(self) -> str:
        with self._lock:
            n = self._conn.execute("SELECT COUNT(*) FROM reviews").fetchone()[0]
        return f"r{n + 1:04d}"

    def next_trail_id(self) -> str:
        with self._lock:
            n = self._conn.execute("SELECT COUNT(*) FROM trails").fetchone()[0]
        return f"t{n + 1:02d}"
