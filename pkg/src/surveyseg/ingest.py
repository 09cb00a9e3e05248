"""Survey table loading, cleaning, and feature-matrix assembly.

Cells are plain Python values: strings for nominal/ordinal categories,
tuples of tokens for multi-select answers, floats for numerics, bools for
flags, and None for missing. Every transformation is a pure function of its
inputs so repeated runs are byte-identical.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateHeader,
    EmptyColumn,
    EmptySelection,
    InvalidSpec,
    MissingColumn,
    RaggedRow,
    UnknownCategory,
    UnknownMood,
    ValueOutsideOrder,
)
from .numerics import seeded_rng

KINDS = ("nominal", "ordinal", "multiselect", "numeric", "boolean")

# split on the common delimiters plus the standalone word "and"
_SPLIT_RE = re.compile(r"[,/&+]|\band\b")

_TRUE_TOKENS = {"true", "yes", "y", "1"}
_FALSE_TOKENS = {"false", "no", "n", "0"}


@dataclass
class ColumnSchema:
    name: str
    kind: str
    ordinal_order: list[str] = field(default_factory=list)
    alias_map: dict[str, str] = field(default_factory=dict)
    merge_map: dict[str, str] = field(default_factory=dict)
    drop: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidSpec(f"column {self.name!r}: unknown kind {self.kind!r}")
        if len(set(self.ordinal_order)) != len(self.ordinal_order):
            raise InvalidSpec(f"column {self.name!r}: duplicate ordinal levels")


@dataclass
class DataTable:
    columns: list[ColumnSchema]
    rows: list[list]

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_cols(self) -> int:
        return len(self.columns)

    def column_index(self, name: str) -> int:
        for i, col in enumerate(self.columns):
            if col.name == name:
                return i
        raise MissingColumn(f"column {name!r} not in table")

    def column_values(self, name: str) -> list:
        idx = self.column_index(name)
        return [row[idx] for row in self.rows]

    def observed_categories(self, name: str) -> list[str]:
        """Distinct categories in first-appearance order (multiselect: tokens)."""
        idx = self.column_index(name)
        kind = self.columns[idx].kind
        seen: dict[str, None] = {}
        for row in self.rows:
            cell = row[idx]
            if cell is None:
                continue
            if kind == "multiselect":
                for tok in cell:
                    seen.setdefault(tok)
            else:
                seen.setdefault(str(cell))
        return list(seen)


@dataclass
class IndicatorMatrix:
    values: np.ndarray          # n x J, entries exactly 0/1
    column_labels: list[str]
    source_column: str = ""


@dataclass
class GenreFamilyMap:
    matrix: np.ndarray          # J x K binary
    family_labels: list[str]
    genre_labels: list[str] = field(default_factory=list)


@dataclass
class MoodLexicon:
    valence_positive: frozenset
    valence_neutral: frozenset
    valence_negative: frozenset
    arousal_positive: frozenset
    arousal_neutral: frozenset
    arousal_negative: frozenset

    def vocabulary(self) -> frozenset:
        return (self.valence_positive | self.valence_neutral | self.valence_negative)


#: The default affect lexicon over the nine mood tokens.
DEFAULT_MOOD_LEXICON = MoodLexicon(
    valence_positive=frozenset({"excitement", "happy", "calmness", "contented"}),
    valence_neutral=frozenset({"neutral"}),
    valence_negative=frozenset({"anxiety", "depressed", "anger", "guilty"}),
    arousal_positive=frozenset({"excitement", "happy", "anger", "anxiety", "guilty"}),
    arousal_neutral=frozenset({"neutral"}),
    arousal_negative=frozenset({"calmness", "contented", "depressed"}),
)


@dataclass
class FeatureMatrix:
    values: np.ndarray              # n x p, no missing entries
    feature_meta: list[dict]        # per-column {name, source, encoding, ...}
    row_ids: list[int]              # indices into the source table
    dropped_rows: int = 0

    @property
    def feature_names(self) -> list[str]:
        return [m["name"] for m in self.feature_meta]


# --------------------------------------------------------------------------
# loading and normalization


def normalize_multiselect(cell: str | None, alias_map: dict[str, str] | None = None) -> tuple[str, ...]:
    """Lowercase, split on , / & + and standalone "and", trim, alias, dedupe."""
    if cell is None or not str(cell).strip():
        return ()
    alias_map = alias_map or {}
    tokens = []
    for raw in _SPLIT_RE.split(str(cell).lower()):
        tok = raw.strip()
        if not tok:
            continue
        tok = alias_map.get(tok, tok)
        if tok and tok not in tokens:
            tokens.append(tok)
    return tuple(tokens)


def _parse_cell(raw: str, col: ColumnSchema):
    text = raw.strip()
    if col.kind == "multiselect":
        return normalize_multiselect(text, col.alias_map)
    if not text:
        return None
    if col.kind == "numeric":
        try:
            return float(text)
        except ValueError:
            return None
    if col.kind == "boolean":
        low = text.lower()
        if low in _TRUE_TOKENS:
            return True
        if low in _FALSE_TOKENS:
            return False
        return None
    # nominal / ordinal
    return col.alias_map.get(text, text)


def load_table(path, schema: list[ColumnSchema]) -> DataTable:
    """Read a delimited text file with a header row into a DataTable."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumn("file has no header row")
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            dupes = sorted({h for h in header if header.count(h) > 1})
            raise DuplicateHeader(f"duplicated header fields: {dupes}")
        positions = {}
        for col in schema:
            if col.name not in header:
                raise MissingColumn(f"column {col.name!r} missing from header")
            positions[col.name] = header.index(col.name)
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            if len(raw) != len(header):
                raise RaggedRow(
                    f"line {lineno}: {len(raw)} fields, expected {len(header)}"
                )
            rows.append([_parse_cell(raw[positions[c.name]], c) for c in schema])
    return DataTable(columns=list(schema), rows=rows)


def merge_categories(
    table: DataTable,
    column: str,
    merge_map: dict[str, str],
    identity_fallback: bool = False,
) -> DataTable:
    """Rewrite a nominal/ordinal column through merge_map.

    For ordinal columns the level order is collapsed, keeping the relative
    position of the first member of every merged level.
    """
    idx = table.column_index(column)
    col = table.columns[idx]
    new_rows = []
    for row in table.rows:
        cell = row[idx]
        if cell is not None:
            if cell in merge_map:
                cell = merge_map[cell]
            elif not identity_fallback:
                raise UnknownCategory(f"{column!r}: value {cell!r} has no mapping")
        new = list(row)
        new[idx] = cell
        new_rows.append(new)

    new_order = []
    for level in col.ordinal_order:
        target = merge_map.get(level, level if identity_fallback else None)
        if target is None:
            raise UnknownCategory(f"{column!r}: ordinal level {level!r} has no mapping")
        if target not in new_order:
            new_order.append(target)
    new_col = ColumnSchema(
        name=col.name, kind=col.kind, ordinal_order=new_order,
        alias_map=dict(col.alias_map), merge_map={}, drop=col.drop,
    )
    columns = list(table.columns)
    columns[idx] = new_col
    return DataTable(columns=columns, rows=new_rows)


def one_hot(values: list, categories: list[str] | None = None, source: str = "") -> IndicatorMatrix:
    """Binary indicators, one column per category in first-appearance order.

    A missing source cell becomes an all-zero row.
    """
    if categories is None:
        seen: dict[str, None] = {}
        for v in values:
            if v is not None:
                seen.setdefault(str(v))
        categories = list(seen)
    if not categories:
        raise EmptyColumn(f"no observed categories in column {source!r}")
    index = {c: j for j, c in enumerate(categories)}
    mat = np.zeros((len(values), len(categories)))
    for i, v in enumerate(values):
        if v is None:
            continue
        j = index.get(str(v))
        if j is not None:
            mat[i, j] = 1.0
    return IndicatorMatrix(values=mat, column_labels=list(categories), source_column=source)


def multiselect_indicators(values: list, tokens: list[str] | None = None, source: str = "") -> IndicatorMatrix:
    """Token-presence indicators for a multiselect column."""
    if tokens is None:
        seen: dict[str, None] = {}
        for cell in values:
            for tok in (cell or ()):
                seen.setdefault(tok)
        tokens = list(seen)
    if not tokens:
        raise EmptyColumn(f"no observed tokens in column {source!r}")
    index = {t: j for j, t in enumerate(tokens)}
    mat = np.zeros((len(values), len(tokens)))
    for i, cell in enumerate(values):
        for tok in (cell or ()):
            j = index.get(tok)
            if j is not None:
                mat[i, j] = 1.0
    return IndicatorMatrix(values=mat, column_labels=list(tokens), source_column=source)


def ordinal_encode(values: list, order: list[str]) -> list:
    """0-based index into the level order; missing stays None."""
    index = {lvl: i for i, lvl in enumerate(order)}
    codes = []
    for v in values:
        if v is None:
            codes.append(None)
            continue
        if str(v) not in index:
            raise ValueOutsideOrder(f"value {v!r} not in order {order}")
        codes.append(index[str(v)])
    return codes


def ordinal_decode(codes: list, order: list[str]) -> list:
    return [None if c is None else order[int(c)] for c in codes]


# --------------------------------------------------------------------------
# derived features


def genre_richness(indicators: IndicatorMatrix) -> np.ndarray:
    """Number of distinct selections per row."""
    return indicators.values.sum(axis=1)


def family_richness(indicators: IndicatorMatrix, fam: GenreFamilyMap) -> np.ndarray:
    """Number of distinct families with at least one selected member."""
    if fam.matrix.shape[0] != indicators.values.shape[1]:
        raise DimensionMismatch(
            f"{indicators.values.shape[1]} indicator columns vs "
            f"{fam.matrix.shape[0]} family-map rows"
        )
    hits = indicators.values @ fam.matrix
    return (hits >= 1).sum(axis=1).astype(float)


def affect_encode(mood: str, lexicon: MoodLexicon = DEFAULT_MOOD_LEXICON) -> tuple[int, int]:
    """Map a mood token to its (valence, arousal) signs."""
    tok = str(mood).strip().lower()
    if tok in lexicon.valence_positive:
        valence = 1
    elif tok in lexicon.valence_neutral:
        valence = 0
    elif tok in lexicon.valence_negative:
        valence = -1
    else:
        raise UnknownMood(f"mood token {mood!r} not in lexicon")
    if tok in lexicon.arousal_positive:
        arousal = 1
    elif tok in lexicon.arousal_neutral:
        arousal = 0
    else:
        arousal = -1
    return valence, arousal


def filter_rows(table: DataTable, column: str, accepted) -> DataTable:
    """Keep rows whose cell in `column` is in the accepted set, in order."""
    idx = table.column_index(column)
    accepted = set(accepted)
    rows = [row for row in table.rows if row[idx] in accepted]
    return DataTable(columns=list(table.columns), rows=rows)


# --------------------------------------------------------------------------
# assembly


@dataclass
class FeatureConfig:
    columns: list[str]
    richness_for: list[str] = field(default_factory=list)
    family_maps: dict[str, GenreFamilyMap] = field(default_factory=dict)
    affect_from: list[str] = field(default_factory=list)
    lexicon: MoodLexicon = DEFAULT_MOOD_LEXICON
    onehot_categories: dict[str, list[str]] = field(default_factory=dict)


def assemble_features(table: DataTable, config: FeatureConfig) -> FeatureMatrix:
    """Encode the selected columns into one numeric matrix.

    Rows with a missing value in any selected feature are dropped (listwise
    deletion); the drop count is reported on the result. Column order is
    schema order for encoded blocks, derived features appended after.
    """
    if not config.columns and not config.affect_from:
        raise EmptySelection("no columns selected")
    selected = [table.columns[table.column_index(name)] for name in config.columns]
    for name in config.affect_from:
        table.column_index(name)  # raises MissingColumn
    for name in config.richness_for + list(config.family_maps):
        if name not in config.columns:
            raise MissingColumn(f"derived feature source {name!r} not among selected columns")

    affect_cols = [table.columns[table.column_index(n)] for n in config.affect_from]
    keep = []
    for i, row in enumerate(table.rows):
        ok = True
        for col in selected + affect_cols:
            cell = row[table.column_index(col.name)]
            if col.kind != "multiselect" and cell is None:
                ok = False
                break
            if col.name in config.affect_from and cell is not None:
                try:
                    affect_encode(cell, config.lexicon)
                except UnknownMood:
                    ok = False
                    break
        if ok:
            keep.append(i)
    dropped = table.n_rows - len(keep)
    sub = DataTable(columns=list(table.columns), rows=[table.rows[i] for i in keep])

    blocks: list[np.ndarray] = []
    meta: list[dict] = []
    derived_blocks: list[np.ndarray] = []
    derived_meta: list[dict] = []

    for col in selected:
        vals = sub.column_values(col.name)
        if col.kind == "nominal":
            ind = one_hot(vals, config.onehot_categories.get(col.name), source=col.name)
            blocks.append(ind.values)
            meta.extend(
                {"name": f"{col.name}={c}", "source": col.name,
                 "encoding": "onehot", "category": c}
                for c in ind.column_labels
            )
        elif col.kind == "multiselect":
            ind = multiselect_indicators(vals, config.onehot_categories.get(col.name), source=col.name)
            blocks.append(ind.values)
            meta.extend(
                {"name": f"{col.name}={c}", "source": col.name,
                 "encoding": "indicator", "category": c}
                for c in ind.column_labels
            )
            if col.name in config.richness_for:
                derived_blocks.append(genre_richness(ind)[:, None])
                derived_meta.append(
                    {"name": f"{col.name}_richness", "source": col.name,
                     "encoding": "derived", "derived": "richness"}
                )
            if col.name in config.family_maps:
                fam = config.family_maps[col.name]
                fam_ind = multiselect_indicators(vals, fam.genre_labels or ind.column_labels, source=col.name)
                derived_blocks.append(family_richness(fam_ind, fam)[:, None])
                derived_meta.append(
                    {"name": f"{col.name}_family_richness", "source": col.name,
                     "encoding": "derived", "derived": "family_richness"}
                )
        elif col.kind == "ordinal":
            codes = ordinal_encode(vals, col.ordinal_order)
            blocks.append(np.array([float(c) for c in codes])[:, None])
            meta.append(
                {"name": col.name, "source": col.name, "encoding": "ordinal",
                 "order": list(col.ordinal_order)}
            )
        elif col.kind == "numeric":
            blocks.append(np.array([float(v) for v in vals])[:, None])
            meta.append({"name": col.name, "source": col.name, "encoding": "numeric"})
        elif col.kind == "boolean":
            blocks.append(np.array([1.0 if v else 0.0 for v in vals])[:, None])
            meta.append({"name": col.name, "source": col.name, "encoding": "numeric"})

    for col in affect_cols:
        vals = sub.column_values(col.name)
        pairs = [affect_encode(v, config.lexicon) for v in vals]
        derived_blocks.append(np.array([float(p[0]) for p in pairs])[:, None])
        derived_meta.append(
            {"name": f"{col.name}_valence", "source": col.name,
             "encoding": "derived", "derived": "valence"}
        )
        derived_blocks.append(np.array([float(p[1]) for p in pairs])[:, None])
        derived_meta.append(
            {"name": f"{col.name}_arousal", "source": col.name,
             "encoding": "derived", "derived": "arousal"}
        )

    all_blocks = blocks + derived_blocks
    if not all_blocks:
        raise EmptySelection("feature selection produced no columns")
    values = np.hstack(all_blocks)
    return FeatureMatrix(
        values=values, feature_meta=meta + derived_meta,
        row_ids=keep, dropped_rows=dropped,
    )


# --------------------------------------------------------------------------
# schema and table serialization


def load_schema(path) -> list[ColumnSchema]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    cols = []
    for entry in doc["columns"]:
        cols.append(
            ColumnSchema(
                name=entry["name"],
                kind=entry["kind"],
                ordinal_order=list(entry.get("ordinal_order", [])),
                alias_map=dict(entry.get("alias_map", {})),
                merge_map=dict(entry.get("merge_map", {})),
                drop=bool(entry.get("drop", False)),
            )
        )
    return cols


def save_schema(schema: list[ColumnSchema], path) -> None:
    doc = {
        "columns": [
            {
                "name": c.name, "kind": c.kind,
                "ordinal_order": c.ordinal_order,
                "alias_map": c.alias_map, "merge_map": c.merge_map,
                "drop": c.drop,
            }
            for c in schema
        ]
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_table(table: DataTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([c.name for c in table.columns])
        for row in table.rows:
            out = []
            for cell, col in zip(row, table.columns):
                if cell is None:
                    out.append("")
                elif col.kind == "multiselect":
                    out.append(", ".join(cell))
                elif col.kind == "boolean":
                    out.append("yes" if cell else "no")
                elif col.kind == "numeric":
                    out.append(f"{cell:g}")
                else:
                    out.append(str(cell))
            writer.writerow(out)


# --------------------------------------------------------------------------
# synthetic survey generator


_SYNTH_GENRES = ["action", "shooter", "rpg", "adventure", "puzzle", "strategy", "sports", "simulation"]
_SYNTH_FAMILIES = ["combat", "narrative", "thinking", "casual"]
_SYNTH_FAMILY_OF = {
    "action": "combat", "shooter": "combat",
    "rpg": "narrative", "adventure": "narrative",
    "puzzle": "thinking", "strategy": "thinking",
    "sports": "casual", "simulation": "casual",
}
_SYNTH_MOODS = ["excitement", "happy", "calmness", "contented", "neutral",
                "anxiety", "depressed", "anger", "guilty"]
_LIKERT5 = ["very_low", "low", "medium", "high", "very_high"]
_SESSIONS = ["short", "medium", "long", "marathon"]
_PLATFORMS = ["pc", "console", "mobile", "handheld"]
_SOCIAL = ["solo", "friends", "online_community"]


def synth_family_map() -> GenreFamilyMap:
    mat = np.zeros((len(_SYNTH_GENRES), len(_SYNTH_FAMILIES)))
    for j, g in enumerate(_SYNTH_GENRES):
        mat[j, _SYNTH_FAMILIES.index(_SYNTH_FAMILY_OF[g])] = 1.0
    return GenreFamilyMap(matrix=mat, family_labels=list(_SYNTH_FAMILIES),
                          genre_labels=list(_SYNTH_GENRES))


def synth_schema() -> list[ColumnSchema]:
    return [
        ColumnSchema("gamer", "nominal"),
        ColumnSchema("platform", "nominal"),
        ColumnSchema("social_play", "nominal"),
        ColumnSchema("mood_during", "nominal"),
        ColumnSchema("genres", "multiselect"),
        ColumnSchema("play_freq", "ordinal", ordinal_order=list(_LIKERT5)),
        ColumnSchema("session_length", "ordinal", ordinal_order=list(_SESSIONS)),
        ColumnSchema("escapism", "ordinal", ordinal_order=list(_LIKERT5)),
        ColumnSchema("competitiveness", "ordinal", ordinal_order=list(_LIKERT5)),
    ]


@dataclass
class SynthResult:
    table: DataTable
    schema: list[ColumnSchema]
    persona_labels: list[int]
    signatures: list[dict]


def _pick(rng, categories, preferred, sep):
    """(1-sep) uniform + sep point-mass on the preferred category."""
    probs = np.full(len(categories), (1.0 - sep) / len(categories))
    probs[categories.index(preferred)] += sep
    return categories[int(rng.choice(len(categories), p=probs))]


def _pick_level(rng, levels, preferred_idx, sep):
    base = np.full(len(levels), 1.0 / len(levels))
    peak = np.zeros(len(levels))
    peak[preferred_idx] = 0.7
    for d, w in ((1, 0.15), (-1, 0.15)):
        j = preferred_idx + d
        if 0 <= j < len(levels):
            peak[j] += w
        else:
            peak[preferred_idx] += w
    probs = (1.0 - sep) * base + sep * peak
    return levels[int(rng.choice(len(levels), p=probs))]


def synth_survey(n_personas: int, n_rows: int, seed: int, separation: float = 0.9) -> SynthResult:
    """Generate a schema-conformant survey with planted persona structure.

    separation=0 makes every persona draw from the same distribution;
    separation=1 makes each persona nearly deterministic.
    """
    if n_personas < 2:
        raise InvalidSpec("need at least 2 personas")
    if n_rows < 10 * n_personas:
        raise InvalidSpec("need at least 10 rows per persona")
    if not 0.0 <= separation <= 1.0:
        raise InvalidSpec("separation must lie in [0, 1]")

    rng = seeded_rng(seed)
    schema = synth_schema()
    signatures = []
    for p in range(n_personas):
        signatures.append({
            "platform": _PLATFORMS[p % len(_PLATFORMS)],
            "social_play": _SOCIAL[p % len(_SOCIAL)],
            "mood_during": _SYNTH_MOODS[(2 * p) % len(_SYNTH_MOODS)],
            "genres": [_SYNTH_GENRES[(2 * p) % 8], _SYNTH_GENRES[(2 * p + 1) % 8],
                       _SYNTH_GENRES[(2 * p + 3) % 8]],
            "play_freq": (p * 2 + 1) % 5,
            "session_length": p % 4,
            "escapism": (4 - p) % 5,
            "competitiveness": (p * 3) % 5,
        })

    rows = []
    labels = []
    for i in range(n_rows):
        persona = i % n_personas
        sig = signatures[persona]
        labels.append(persona)
        genres = []
        for g in _SYNTH_GENRES:
            base = 0.35
            peak = 0.9 if g in sig["genres"] else 0.05
            prob = (1.0 - separation) * base + separation * peak
            if rng.random() < prob:
                genres.append(g)
        rows.append([
            "yes",
            _pick(rng, _PLATFORMS, sig["platform"], separation),
            _pick(rng, _SOCIAL, sig["social_play"], separation),
            _pick(rng, _SYNTH_MOODS, sig["mood_during"], separation),
            tuple(genres),
            _pick_level(rng, _LIKERT5, sig["play_freq"], separation),
            _pick_level(rng, _SESSIONS, sig["session_length"], separation),
            _pick_level(rng, _LIKERT5, sig["escapism"], separation),
            _pick_level(rng, _LIKERT5, sig["competitiveness"], separation),
        ])
    table = DataTable(columns=schema, rows=rows)
    return SynthResult(table=table, schema=schema, persona_labels=labels,
                       signatures=signatures)


def synth_feature_config() -> FeatureConfig:
    """Feature selection matching the bundled synthetic schema."""
    return FeatureConfig(
        columns=["platform", "social_play", "genres", "play_freq",
                 "session_length", "escapism", "competitiveness"],
        richness_for=["genres"],
        family_maps={"genres": synth_family_map()},
        affect_from=["mood_during"],
        onehot_categories={
            "platform": list(_PLATFORMS),
            "social_play": list(_SOCIAL),
            "genres": list(_SYNTH_GENRES),
        },
    )
