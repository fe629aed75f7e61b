import random

import pytest

from trailbot.errors import FilterParseError
from trailbot.filter_dsl import (
    ACTIVITIES,
    DIFFICULTIES,
    TRISTATE,
    And,
    Comparison,
    FilterExpr,
    Has,
    MatchAll,
    Not,
    Or,
    parse_filter,
    pretty_print,
)
from trailbot.store import TrailRecord, TrailStore


def test_parse_conjunction():
    expr = parse_filter('length_miles <= 5 AND difficulty = "easy"')
    assert expr.where == And(
        (Comparison("length_miles", "<=", 5.0), Comparison("difficulty", "=", "easy"))
    )
    assert expr.order_by is None and expr.limit is None


def test_parse_empty_is_match_all():
    assert parse_filter("") == FilterExpr(MatchAll(), None, None)
    assert parse_filter("   ") == FilterExpr(MatchAll(), None, None)


def test_parse_has_order_limit():
    expr = parse_filter('activities HAS "biking" ORDER BY length_miles ASC LIMIT 3')
    assert expr.where == Has("activities", "biking")
    assert expr.order_by == ("length_miles", "asc")
    assert expr.limit == 3
    # fixed point of pretty printing
    assert parse_filter(pretty_print(expr)) == expr


def test_keywords_case_insensitive():
    a = parse_filter('not pets_allowed = "no" and length_miles > 1 or town = "Kent"')
    b = parse_filter('NOT pets_allowed = "no" AND length_miles > 1 OR town = "Kent"')
    assert a == b


@pytest.mark.parametrize(
    "text,fragment",
    [
        ('bogus = "x"', "unknown field"),
        ('length_miles = "five"', "number"),
        ('difficulty < "easy"', "ordering"),
        ('difficulty = "hard"', "not a valid"),
        ('activities = "biking"', "HAS"),
        ('town HAS "Kent"', "set fields"),
        ('activities HAS "skiing"', "not a valid"),
        ("length_miles <= ", "number"),
        ('(town = "Kent"', "')'"),
        ('town = "Kent" town = "Kent"', "end of input"),
        ("ORDER BY activities", "set field"),
        ("LIMIT -1", "nonnegative"),
        ("LIMIT 1.5", "nonnegative"),
        ('name = "unterminated', "unexpected"),
    ],
)
def test_parse_errors_carry_position(text, fragment):
    with pytest.raises(FilterParseError) as excinfo:
        parse_filter(text)
    assert fragment in str(excinfo.value)
    assert 0 <= excinfo.value.position <= len(text)


def test_parse_never_executes():
    # parsing is pure: no store involved, same AST twice
    assert parse_filter('name != "x"') == parse_filter('name != "x"')


# ---------------------------------------------------------------------------
# Randomized AST roundtrip and exec-vs-scan equivalence

_STRING_FIELDS = ("name", "town", "description")


def random_leaf(rng, names):
    roll = rng.random()
    if roll < 0.25:
        return Comparison("length_miles", rng.choice(["=", "!=", "<", "<=", ">", ">="]),
                          round(rng.uniform(0.5, 12.0), 1))
    if roll < 0.45:
        return Comparison("difficulty", rng.choice(["=", "!="]), rng.choice(DIFFICULTIES))
    if roll < 0.6:
        return Comparison(rng.choice(["pets_allowed", "wheelchair_accessible"]),
                          rng.choice(["=", "!="]), rng.choice(TRISTATE))
    if roll < 0.8:
        return Has("activities", rng.choice(ACTIVITIES))
    field = rng.choice(_STRING_FIELDS)
    value = rng.choice(names) if field == "name" and names else rng.choice(
        ["Kent", "Granby", "a path", 'quo"ted', "back\\slash"]
    )
    return Comparison(field, rng.choice(["=", "!=", "<", "<=", ">", ">="]), value)


def random_node(rng, names, depth=0):
    if depth >= 3 or rng.random() < 0.5:
        return random_leaf(rng, names)
    kind = rng.random()
    if kind < 0.4:
        return And(tuple(random_node(rng, names, depth + 1) for _ in range(rng.randint(2, 3))))
    if kind < 0.8:
        return Or(tuple(random_node(rng, names, depth + 1) for _ in range(rng.randint(2, 3))))
    return Not(random_node(rng, names, depth + 1))


def random_expr(rng, names):
    where = MatchAll() if rng.random() < 0.1 else random_node(rng, names)
    order_by = None
    if rng.random() < 0.5:
        order_by = (rng.choice(["name", "town", "length_miles", "difficulty"]),
                    rng.choice(["asc", "desc"]))
    limit = rng.randint(0, 8) if rng.random() < 0.4 else None
    return FilterExpr(where, order_by, limit)


def random_store(rng, n):
    store = TrailStore()
    for i in range(n):
        store.upsert_trail(TrailRecord(
            id=f"t{i:03d}",
            name=f"Trail {rng.randint(0, 999):03d} {i:03d}",
            town=rng.choice(["Kent", "Granby", "Vernon", "Durham", "Groton"]),
            length_miles=round(rng.uniform(0.5, 12.0), 1),
            difficulty=rng.choice(DIFFICULTIES),
            activities=frozenset(rng.sample(ACTIVITIES, rng.randint(1, 3))),
            pets_allowed=rng.choice(TRISTATE),
            wheelchair_accessible=rng.choice(TRISTATE),
            description=rng.choice(["", "short walk", "rocky ridge", 'has "quotes"']),
        ))
    return store


# Independent predicate scan: evaluates the AST over in-memory records
# without touching SQL.
def scan_predicate(node, trail):
    if isinstance(node, MatchAll):
        return True
    if isinstance(node, Comparison):
        actual = getattr(trail, node.field)
        ops = {
            "=": lambda a, b: a == b,
            "!=": lambda a, b: a != b,
            "<": lambda a, b: a < b,
            "<=": lambda a, b: a <= b,
            ">": lambda a, b: a > b,
            ">=": lambda a, b: a >= b,
        }
        return ops[node.op](actual, node.value)
    if isinstance(node, Has):
        return node.value in trail.activities
    if isinstance(node, Not):
        return not scan_predicate(node.inner, trail)
    if isinstance(node, And):
        return all(scan_predicate(p, trail) for p in node.parts)
    if isinstance(node, Or):
        return any(scan_predicate(p, trail) for p in node.parts)
    raise TypeError(node)


def scan_filter(expr, trails):
    matched = [t for t in trails if scan_predicate(expr.where, t)]
    if expr.order_by is None:
        matched.sort(key=lambda t: t.name)
    else:
        field, direction = expr.order_by
        matched.sort(key=lambda t: t.name)
        matched.sort(key=lambda t: getattr(t, field), reverse=(direction == "desc"))
    if expr.limit is not None:
        matched = matched[: expr.limit]
    return matched


def test_roundtrip_and_exec_match_scan_randomized():
    rng = random.Random(20250810)
    trials = 500
    for trial in range(trials):
        store = random_store(rng, rng.randint(0, 12))
        names = [t.name for t in store.list_trails()]
        expr = random_expr(rng, names)

        # pretty-print fixed point
        printed = pretty_print(expr)
        assert parse_filter(printed) == expr, (trial, printed)

        got = store.exec_filter(expr)
        want = scan_filter(expr, store.list_trails())
        assert [t.id for t in got] == [t.id for t in want], (trial, printed)
        assert got == want
        store.close()


def test_limit_zero_returns_empty(corpus_store):
    assert corpus_store.exec_filter(parse_filter('difficulty = "easy" LIMIT 0')) == []
