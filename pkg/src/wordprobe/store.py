"""SQLite persistence for experiments, word lists, and answer records.

A single database file holds everything; (experiment_id, word,
prompt_id) is the record primary key and duplicate saves are
first-write-wins, which is what makes stopped runs resumable.
"""

from __future__ import annotations

import json
import sqlite3
import uuid
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterator, Sequence

from .dispatch import AnswerRecord, DispatchPolicy
from .lexicon import Word, WordList, WordSource
from .prompts import AnswerClass, PromptTemplate, builtin_battery, lint_battery

SCHEMA_VERSION = 1

BUILTIN_BATTERY_ID = "builtin"


class StoreError(Exception):
    pass


class UnknownExperiment(StoreError):
    pass


class MissingReference(StoreError):
    pass


class IllegalTransition(StoreError):
    pass


class ValidationError(StoreError):
    def __init__(self, field_name: str, reason: str):
        super().__init__(f"{field_name}: {reason}")
        self.field = field_name
        self.reason = reason


class ExperimentState(str, Enum):
    DRAFT = "Draft"
    RUNNING = "Running"
    PAUSED = "Paused"
    STOPPED = "Stopped"
    COMPLETE = "Complete"


# Stopped -> Running is what makes resume work; Stopped -> Complete
# covers a run whose in-flight tail finished everything after a stop.
_LEGAL_TRANSITIONS: dict[ExperimentState, set[ExperimentState]] = {
    ExperimentState.DRAFT: {ExperimentState.RUNNING},
    ExperimentState.RUNNING: {
        ExperimentState.PAUSED,
        ExperimentState.STOPPED,
        ExperimentState.COMPLETE,
    },
    ExperimentState.PAUSED: {
        ExperimentState.RUNNING,
        ExperimentState.STOPPED,
        ExperimentState.COMPLETE,
    },
    ExperimentState.STOPPED: {ExperimentState.RUNNING, ExperimentState.COMPLETE},
    ExperimentState.COMPLETE: set(),
}


class ProviderKind(str, Enum):
    MOCK = "Mock"
    HTTP_CHAT = "HttpChat"


@dataclass
class ExperimentSpec:
    id: str
    name: str
    description: str
    wordlist_id: str
    battery_id: str
    provider_kind: ProviderKind
    model: str
    temperature: float
    dispatch: DispatchPolicy
    created_at: datetime
    state: ExperimentState
    max_output_tokens: int = 10
    system_message: str | None = None
    config: dict = field(default_factory=dict)


@dataclass(frozen=True)
class FieldDescriptor:
    """One form field of an experiment template."""

    type: str  # "select" | "number"
    name: str = ""
    placeholder: str = ""
    options: tuple[tuple[str, str], ...] = ()  # (label, value) pairs
    value: object = None
    step: float | None = None
    min: float | None = None
    max: float | None = None

    def __post_init__(self):
        if self.type not in ("select", "number"):
            raise ValidationError(self.name or self.type, f"unknown field type {self.type!r}")
        if self.type == "select" and not self.options:
            raise ValidationError(self.name or "select", "select field needs options")
        if self.type == "number":
            if self.step is not None and self.step <= 0:
                raise ValidationError(self.name or "number", "step must be positive")
            if (
                self.min is not None
                and self.max is not None
                and self.min > self.max
            ):
                raise ValidationError(self.name or "number", "min exceeds max")


@dataclass(frozen=True)
class ExperimentConfigSchema:
    """Metadata document describing an experiment's form fields."""

    name: str
    description: str
    configuration: dict[str, FieldDescriptor]

    @classmethod
    def from_document(cls, doc: dict) -> "ExperimentConfigSchema":
        configuration: dict[str, FieldDescriptor] = {}
        for key, raw in doc.get("configuration", {}).items():
            options: list[tuple[str, str]] = []
            for opt in raw.get("options", []):
                if isinstance(opt, dict):
                    options.extend((str(k), str(v)) for k, v in opt.items())
                else:
                    options.append((str(opt), str(opt)))
            configuration[key] = FieldDescriptor(
                type=raw["type"],
                name=raw.get("name", key),
                placeholder=raw.get("placeholder", ""),
                options=tuple(options),
                value=raw.get("value"),
                step=raw.get("step"),
                min=raw.get("min"),
                max=raw.get("max"),
            )
        return cls(
            name=doc.get("name", ""),
            description=doc.get("description", ""),
            configuration=configuration,
        )

    def to_document(self) -> dict:
        doc: dict = {"name": self.name, "description": self.description, "configuration": {}}
        for key, f in self.configuration.items():
            entry: dict = {"type": f.type}
            if f.type == "select":
                entry["options"] = [{label: value} for label, value in f.options]
            if f.name and f.name != key:
                entry["name"] = f.name
            if f.placeholder:
                entry["placeholder"] = f.placeholder
            for attr in ("value", "step", "min", "max"):
                v = getattr(self.configuration[key], attr)
                if v is not None:
                    entry[attr] = v
            doc["configuration"][key] = entry
        return doc

    def validate(self, values: dict) -> dict:
        """Check submitted values against the schema; returns them normalized."""
        unknown = set(values) - set(self.configuration)
        if unknown:
            raise ValidationError(sorted(unknown)[0], "not a field of this template")
        normalized: dict = {}
        for key, descriptor in self.configuration.items():
            if key in values:
                value = values[key]
            elif descriptor.value is not None:
                value = descriptor.value
            else:
                raise ValidationError(key, "missing value")
            if descriptor.type == "select":
                allowed = [v for _, v in descriptor.options]
                if str(value) not in allowed:
                    raise ValidationError(key, f"{value!r} is not one of {allowed}")
                normalized[key] = str(value)
            else:
                try:
                    number = float(value)
                except (TypeError, ValueError):
                    raise ValidationError(key, f"{value!r} is not a number") from None
                if descriptor.min is not None and number < descriptor.min:
                    raise ValidationError(key, f"{number} below minimum {descriptor.min}")
                if descriptor.max is not None and number > descriptor.max:
                    raise ValidationError(key, f"{number} above maximum {descriptor.max}")
                normalized[key] = number
        return normalized


def default_template() -> ExperimentConfigSchema:
    """The shipped experiment template (model select + temperature)."""
    doc = json.loads(
        resources.files("wordprobe.data").joinpath("experiment_template.json").read_text("utf-8")
    )
    return ExperimentConfigSchema.from_document(doc)


def _now() -> datetime:
    return datetime.now(timezone.utc)


class Store:
    """One SQLite file; a fresh connection per operation.

    Safe for one logical writer per experiment plus any number of
    readers (WAL mode). The schema version lives in PRAGMA
    user_version.
    """

    def __init__(self, path: str | Path):
        self._path = str(path)
        self.duplicate_saves: dict[str, int] = {}
        self._init_schema()

    @contextmanager
    def _connect(self) -> Iterator[sqlite3.Connection]:
        conn = sqlite3.connect(self._path, timeout=30.0)
        conn.row_factory = sqlite3.Row
        conn.execute("PRAGMA journal_mode=WAL")
        conn.execute("PRAGMA foreign_keys=ON")
        try:
            with conn:  # one transaction per operation
                yield conn
        finally:
            conn.close()

    def _init_schema(self) -> None:
        with self._connect() as conn:
            version = conn.execute("PRAGMA user_version").fetchone()[0]
            if version == 0:
                conn.executescript(
                    """
                    CREATE TABLE IF NOT EXISTS wordlists (
                        id TEXT PRIMARY KEY,
                        name TEXT NOT NULL,
                        source TEXT NOT NULL,
                        fold_case INTEGER NOT NULL DEFAULT 1,
                        created_at TEXT NOT NULL
                    );
                    CREATE TABLE IF NOT EXISTS wordlist_words (
                        wordlist_id TEXT NOT NULL REFERENCES wordlists(id),
                        pos INTEGER NOT NULL,
                        word TEXT NOT NULL,
                        PRIMARY KEY (wordlist_id, pos)
                    );
                    CREATE TABLE IF NOT EXISTS batteries (
                        id TEXT PRIMARY KEY,
                        body TEXT NOT NULL
                    );
                    CREATE TABLE IF NOT EXISTS experiments (
                        id TEXT PRIMARY KEY,
                        name TEXT NOT NULL,
                        description TEXT NOT NULL DEFAULT '',
                        wordlist_id TEXT NOT NULL REFERENCES wordlists(id),
                        battery_id TEXT NOT NULL REFERENCES batteries(id),
                        provider_kind TEXT NOT NULL,
                        model TEXT NOT NULL,
                        temperature REAL NOT NULL,
                        dispatch TEXT NOT NULL,
                        max_output_tokens INTEGER NOT NULL DEFAULT 10,
                        system_message TEXT,
                        config TEXT NOT NULL DEFAULT '{}',
                        created_at TEXT NOT NULL,
                        state TEXT NOT NULL
                    );
                    CREATE TABLE IF NOT EXISTS answer_records (
                        experiment_id TEXT NOT NULL REFERENCES experiments(id),
                        word TEXT NOT NULL,
                        prompt_id TEXT NOT NULL,
                        raw_text TEXT NOT NULL,
                        parsed TEXT NOT NULL,
                        attempts INTEGER NOT NULL,
                        completed_at TEXT NOT NULL,
                        latency REAL NOT NULL,
                        PRIMARY KEY (experiment_id, word, prompt_id)
                    );
                    """
                )
                conn.execute(f"PRAGMA user_version = {SCHEMA_VERSION}")
            elif version != SCHEMA_VERSION:
                raise StoreError(
                    f"store schema version {version} != supported {SCHEMA_VERSION}"
                )
        self._ensure_builtin_battery()

    def _ensure_builtin_battery(self) -> None:
        with self._connect() as conn:
            row = conn.execute(
                "SELECT id FROM batteries WHERE id = ?", (BUILTIN_BATTERY_ID,)
            ).fetchone()
            if row is None:
                body = json.dumps(
                    [
                        {"id": t.id, "text": t.text, "language_hint": t.language_hint}
                        for t in builtin_battery()
                    ],
                    ensure_ascii=False,
                )
                conn.execute(
                    "INSERT INTO batteries (id, body) VALUES (?, ?)",
                    (BUILTIN_BATTERY_ID, body),
                )

    # -- word lists ------------------------------------------------------

    def add_wordlist(
        self,
        words: Sequence[Word],
        name: str,
        source: WordSource = WordSource.MANUAL,
        fold_case: bool = True,
        wordlist_id: str | None = None,
    ) -> WordList:
        wl = WordList(
            id=wordlist_id or uuid.uuid4().hex[:12],
            name=name,
            words=list(words),
            source=source,
            fold_case=fold_case,
        )
        with self._connect() as conn:
            conn.execute(
                "INSERT INTO wordlists (id, name, source, fold_case, created_at) VALUES (?, ?, ?, ?, ?)",
                (wl.id, wl.name, wl.source.value, int(wl.fold_case), wl.created_at.isoformat()),
            )
            conn.executemany(
                "INSERT INTO wordlist_words (wordlist_id, pos, word) VALUES (?, ?, ?)",
                [(wl.id, i, w) for i, w in enumerate(wl.words)],
            )
        return wl

    def set_wordlist_words(self, wordlist_id: str, words: Sequence[Word]) -> None:
        with self._connect() as conn:
            row = conn.execute("SELECT id FROM wordlists WHERE id = ?", (wordlist_id,)).fetchone()
            if row is None:
                raise MissingReference(f"unknown wordlist {wordlist_id!r}")
            conn.execute("DELETE FROM wordlist_words WHERE wordlist_id = ?", (wordlist_id,))
            conn.executemany(
                "INSERT INTO wordlist_words (wordlist_id, pos, word) VALUES (?, ?, ?)",
                [(wordlist_id, i, w) for i, w in enumerate(words)],
            )

    def get_wordlist(self, wordlist_id: str) -> WordList:
        with self._connect() as conn:
            row = conn.execute(
                "SELECT * FROM wordlists WHERE id = ?", (wordlist_id,)
            ).fetchone()
            if row is None:
                raise MissingReference(f"unknown wordlist {wordlist_id!r}")
            words = [
                r["word"]
                for r in conn.execute(
                    "SELECT word FROM wordlist_words WHERE wordlist_id = ? ORDER BY pos",
                    (wordlist_id,),
                )
            ]
        return WordList(
            id=row["id"],
            name=row["name"],
            words=words,
            source=WordSource(row["source"]),
            created_at=datetime.fromisoformat(row["created_at"]),
            fold_case=bool(row["fold_case"]),
        )

    # -- batteries -------------------------------------------------------

    def add_battery(self, battery_id: str, battery: Sequence[PromptTemplate]) -> None:
        problems = lint_battery(list(battery))
        if problems:
            raise ValidationError("battery", "; ".join(problems))
        body = json.dumps(
            [{"id": t.id, "text": t.text, "language_hint": t.language_hint} for t in battery],
            ensure_ascii=False,
        )
        with self._connect() as conn:
            conn.execute(
                "INSERT OR REPLACE INTO batteries (id, body) VALUES (?, ?)",
                (battery_id, body),
            )

    def get_battery(self, battery_id: str) -> list[PromptTemplate]:
        with self._connect() as conn:
            row = conn.execute("SELECT body FROM batteries WHERE id = ?", (battery_id,)).fetchone()
        if row is None:
            raise MissingReference(f"unknown battery {battery_id!r}")
        return [
            PromptTemplate(id=e["id"], text=e["text"], language_hint=e.get("language_hint", ""))
            for e in json.loads(row["body"])
        ]

    # -- experiments -----------------------------------------------------

    def create_experiment(
        self,
        values: dict,
        wordlist_id: str,
        battery_id: str = BUILTIN_BATTERY_ID,
        name: str = "experiment",
        description: str = "",
        provider_kind: ProviderKind = ProviderKind.MOCK,
        dispatch: DispatchPolicy | None = None,
        schema: ExperimentConfigSchema | None = None,
        max_output_tokens: int = 10,
        system_message: str | None = None,
        experiment_id: str | None = None,
    ) -> ExperimentSpec:
        schema = schema or default_template()
        normalized = schema.validate(values)
        model = str(normalized.get("model", "unspecified"))
        temperature = float(normalized.get("temperature", 0.0))
        spec = ExperimentSpec(
            id=experiment_id or uuid.uuid4().hex[:12],
            name=name,
            description=description,
            wordlist_id=wordlist_id,
            battery_id=battery_id,
            provider_kind=provider_kind,
            model=model,
            temperature=temperature,
            dispatch=dispatch or DispatchPolicy(),
            created_at=_now(),
            state=ExperimentState.DRAFT,
            max_output_tokens=max_output_tokens,
            system_message=system_message,
            config=normalized,
        )
        with self._connect() as conn:
            for table, ref in (("wordlists", wordlist_id), ("batteries", battery_id)):
                if conn.execute(f"SELECT 1 FROM {table} WHERE id = ?", (ref,)).fetchone() is None:
                    raise MissingReference(f"unknown {table[:-1]} {ref!r}")
            conn.execute(
                """
                INSERT INTO experiments
                    (id, name, description, wordlist_id, battery_id, provider_kind,
                     model, temperature, dispatch, max_output_tokens, system_message,
                     config, created_at, state)
                VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
                """,
                (
                    spec.id,
                    spec.name,
                    spec.description,
                    spec.wordlist_id,
                    spec.battery_id,
                    spec.provider_kind.value,
                    spec.model,
                    spec.temperature,
                    json.dumps(vars(spec.dispatch)),
                    spec.max_output_tokens,
                    spec.system_message,
                    json.dumps(spec.config),
                    spec.created_at.isoformat(),
                    spec.state.value,
                ),
            )
        return spec

    def _row_to_spec(self, row: sqlite3.Row) -> ExperimentSpec:
        return ExperimentSpec(
            id=row["id"],
            name=row["name"],
            description=row["description"],
            wordlist_id=row["wordlist_id"],
            battery_id=row["battery_id"],
            provider_kind=ProviderKind(row["provider_kind"]),
            model=row["model"],
            temperature=row["temperature"],
            dispatch=DispatchPolicy(**json.loads(row["dispatch"])),
            created_at=datetime.fromisoformat(row["created_at"]),
            state=ExperimentState(row["state"]),
            max_output_tokens=row["max_output_tokens"],
            system_message=row["system_message"],
            config=json.loads(row["config"]),
        )

    def get_experiment(self, experiment_id: str) -> ExperimentSpec:
        with self._connect() as conn:
            row = conn.execute(
                "SELECT * FROM experiments WHERE id = ?", (experiment_id,)
            ).fetchone()
        if row is None:
            raise UnknownExperiment(f"unknown experiment {experiment_id!r}")
        return self._row_to_spec(row)

    def experiments(self) -> list[ExperimentSpec]:
        with self._connect() as conn:
            rows = conn.execute("SELECT * FROM experiments ORDER BY created_at, id").fetchall()
        return [self._row_to_spec(r) for r in rows]

    def find_experiment(self, name: str) -> ExperimentSpec | None:
        matches = [e for e in self.experiments() if e.name == name]
        return matches[0] if matches else None

    def set_state(self, experiment_id: str, state: ExperimentState) -> ExperimentState:
        """Transition the experiment; same-state transitions are no-ops."""
        state = ExperimentState(state)
        with self._connect() as conn:
            row = conn.execute(
                "SELECT state FROM experiments WHERE id = ?", (experiment_id,)
            ).fetchone()
            if row is None:
                raise UnknownExperiment(f"unknown experiment {experiment_id!r}")
            current = ExperimentState(row["state"])
            if state is current:
                return state
            if state not in _LEGAL_TRANSITIONS[current]:
                raise IllegalTransition(f"{current.value} -> {state.value} is not allowed")
            if state is ExperimentState.COMPLETE and self._pending_count(conn, experiment_id) > 0:
                raise IllegalTransition("cannot mark Complete with pending pairs")
            conn.execute(
                "UPDATE experiments SET state = ? WHERE id = ?",
                (state.value, experiment_id),
            )
        return state

    # -- answer records --------------------------------------------------

    def save_record(self, record: AnswerRecord) -> bool:
        """Persist one probe result; first write wins. Returns True if new."""
        with self._connect() as conn:
            exists = conn.execute(
                "SELECT 1 FROM experiments WHERE id = ?", (record.experiment_id,)
            ).fetchone()
            if exists is None:
                raise UnknownExperiment(f"unknown experiment {record.experiment_id!r}")
            cursor = conn.execute(
                """
                INSERT OR IGNORE INTO answer_records
                    (experiment_id, word, prompt_id, raw_text, parsed, attempts, completed_at, latency)
                VALUES (?, ?, ?, ?, ?, ?, ?, ?)
                """,
                (
                    record.experiment_id,
                    record.word,
                    record.prompt_id,
                    record.raw_text,
                    record.parsed.value,
                    record.attempts,
                    record.completed_at.isoformat(),
                    record.latency,
                ),
            )
            inserted = cursor.rowcount == 1
        if not inserted:
            self.duplicate_saves[record.experiment_id] = (
                self.duplicate_saves.get(record.experiment_id, 0) + 1
            )
        return inserted

    def records(self, experiment_id: str) -> list[AnswerRecord]:
        self.get_experiment(experiment_id)
        with self._connect() as conn:
            rows = conn.execute(
                "SELECT * FROM answer_records WHERE experiment_id = ? ORDER BY word, prompt_id",
                (experiment_id,),
            ).fetchall()
        return [
            AnswerRecord(
                experiment_id=r["experiment_id"],
                word=r["word"],
                prompt_id=r["prompt_id"],
                raw_text=r["raw_text"],
                parsed=AnswerClass(r["parsed"]),
                attempts=r["attempts"],
                completed_at=datetime.fromisoformat(r["completed_at"]),
                latency=r["latency"],
            )
            for r in rows
        ]

    def _pending_count(self, conn: sqlite3.Connection, experiment_id: str) -> int:
        row = conn.execute(
            "SELECT wordlist_id, battery_id FROM experiments WHERE id = ?",
            (experiment_id,),
        ).fetchone()
        words = conn.execute(
            "SELECT COUNT(*) FROM wordlist_words WHERE wordlist_id = ?",
            (row["wordlist_id"],),
        ).fetchone()[0]
        battery = json.loads(
            conn.execute(
                "SELECT body FROM batteries WHERE id = ?", (row["battery_id"],)
            ).fetchone()["body"]
        )
        stored = conn.execute(
            "SELECT COUNT(*) FROM answer_records WHERE experiment_id = ?",
            (experiment_id,),
        ).fetchone()[0]
        return words * len(battery) - stored

    def pending_pairs(self, experiment_id: str) -> set[tuple[Word, str]]:
        """Word x prompt pairs not yet answered for this experiment."""
        spec = self.get_experiment(experiment_id)
        words = self.get_wordlist(spec.wordlist_id).words
        prompt_ids = [t.id for t in self.get_battery(spec.battery_id)]
        with self._connect() as conn:
            done = {
                (r["word"], r["prompt_id"])
                for r in conn.execute(
                    "SELECT word, prompt_id FROM answer_records WHERE experiment_id = ?",
                    (experiment_id,),
                )
            }
        return {(w, p) for w in words for p in prompt_ids} - done


@dataclass(frozen=True)
class Snapshot:
    """Point-in-time view of an experiment's progress."""

    experiment_id: str
    state: ExperimentState
    total: int
    answered: int
    yes: int
    no: int
    unparseable: int
    records: tuple[AnswerRecord, ...]
    prompt_ids: tuple[str, ...]

    @property
    def progress(self) -> float:
        return self.answered / self.total if self.total else 0.0


def snapshot(store: Store, experiment_id: str) -> Snapshot:
    """Consistent view for reporting; safe alongside a live run."""
    spec = store.get_experiment(experiment_id)
    prompt_ids = tuple(t.id for t in store.get_battery(spec.battery_id))
    total = len(store.get_wordlist(spec.wordlist_id).words) * len(prompt_ids)
    records = tuple(store.records(experiment_id))
    by_class = {c: 0 for c in AnswerClass}
    for r in records:
        by_class[r.parsed] += 1
    # re-read state after the records: progress may only move forward
    state = store.get_experiment(experiment_id).state
    return Snapshot(
        experiment_id=experiment_id,
        state=state,
        total=total,
        answered=len(records),
        yes=by_class[AnswerClass.YES],
        no=by_class[AnswerClass.NO],
        unparseable=by_class[AnswerClass.UNPARSEABLE],
        records=records,
        prompt_ids=prompt_ids,
    )
