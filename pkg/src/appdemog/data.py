"""Dataset container, CSV ingestion, and CSV export.

The on-disk form is three headered CSVs: users.csv (user_id plus the six
demographic columns, empty meaning missing), usage.csv (user_id, app_id;
duplicates allowed), and apps.csv (app_id, app_name, category). The
synthetic generator exports the same triple, so generated and ingested
datasets are interchangeable end to end.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .dimred import CategoryMap
from .errors import DataFormatError
from .sampling import ATTRIBUTES, DemographicRecord
from .sparse import SparseBinaryMatrix

USERS_CSV = "users.csv"
USAGE_CSV = "usage.csv"
APPS_CSV = "apps.csv"
_USER_FIELDS = ("user_id",) + ATTRIBUTES
_INT_FIELDS = {"age", "children", "income"}


@dataclass(frozen=True)
class IngestManifest:
    users_path: Path
    usage_path: Path
    apps_path: Path
    min_users_per_app: int = 10

    @classmethod
    def for_directory(cls, directory, min_users_per_app: int = 10) -> "IngestManifest":
        d = Path(directory)
        return cls(d / USERS_CSV, d / USAGE_CSV, d / APPS_CSV, min_users_per_app)


@dataclass(frozen=True)
class Dataset:
    matrix: SparseBinaryMatrix
    records: list[DemographicRecord]
    app_names: list[str]
    categories: CategoryMap
    user_ids: list[str]
    app_ids: list[str]

    def summary(self) -> dict:
        counts = self.matrix.row_counts()
        return {
            "users": self.matrix.n_rows,
            "apps": self.matrix.n_cols,
            "mean_apps_per_user": float(counts.mean()) if len(counts) else 0.0,
        }


def _open_csv(path: Path, required: tuple[str, ...]):
    if not path.exists():
        raise DataFormatError(f"{path}: file not found")
    handle = open(path, newline="", encoding="utf-8")
    reader = csv.DictReader(handle)
    missing = [c for c in required if c not in (reader.fieldnames or [])]
    if missing:
        handle.close()
        raise DataFormatError(f"{path}: missing columns {missing}")
    return handle, reader


def _parse_record(path: Path, line: int, row_index: int, row: dict) -> DemographicRecord:
    kwargs: dict = {"user_row": row_index}
    for attr in ATTRIBUTES:
        raw = (row.get(attr) or "").strip()
        if raw == "":
            kwargs[attr] = None
        elif attr in _INT_FIELDS:
            try:
                kwargs[attr] = int(raw)
            except ValueError as exc:
                raise DataFormatError(f"{path}:{line}: bad {attr} value {raw!r}") from exc
        else:
            kwargs[attr] = raw
    try:
        return DemographicRecord(**kwargs)
    except DataFormatError as exc:
        raise DataFormatError(f"{path}:{line}: {exc}") from exc


def ingest(manifest: IngestManifest, verbose: bool = True) -> Dataset:
    """Load the CSV triple, drop rare apps then empty users, build the dataset."""
    handle, reader = _open_csv(manifest.apps_path, ("app_id", "app_name", "category"))
    app_index: dict[str, int] = {}
    app_ids: list[str] = []
    app_names: list[str] = []
    app_cats: list[str] = []
    with handle:
        for row in reader:
            app_id = (row["app_id"] or "").strip()
            if not app_id:
                raise DataFormatError(f"{manifest.apps_path}:{reader.line_num}: empty app_id")
            if app_id in app_index:
                raise DataFormatError(
                    f"{manifest.apps_path}:{reader.line_num}: duplicate app id {app_id!r}"
                )
            app_index[app_id] = len(app_names)
            app_ids.append(app_id)
            app_names.append((row["app_name"] or "").strip())
            app_cats.append((row["category"] or "").strip())

    handle, reader = _open_csv(manifest.users_path, _USER_FIELDS)
    user_index: dict[str, int] = {}
    user_ids: list[str] = []
    records: list[DemographicRecord] = []
    with handle:
        for row in reader:
            user_id = (row["user_id"] or "").strip()
            if not user_id:
                raise DataFormatError(f"{manifest.users_path}:{reader.line_num}: empty user_id")
            if user_id in user_index:
                raise DataFormatError(
                    f"{manifest.users_path}:{reader.line_num}: duplicate user id {user_id!r}"
                )
            user_index[user_id] = len(user_ids)
            records.append(_parse_record(manifest.users_path, reader.line_num, len(user_ids), row))
            user_ids.append(user_id)

    handle, reader = _open_csv(manifest.usage_path, ("user_id", "app_id"))
    pairs: list[tuple[int, int]] = []
    with handle:
        for row in reader:
            uid = (row["user_id"] or "").strip()
            aid = (row["app_id"] or "").strip()
            if uid not in user_index:
                raise DataFormatError(
                    f"{manifest.usage_path}:{reader.line_num}: unknown user id {uid!r}"
                )
            if aid not in app_index:
                raise DataFormatError(
                    f"{manifest.usage_path}:{reader.line_num}: unknown app id {aid!r}"
                )
            pairs.append((user_index[uid], app_index[aid]))

    matrix = SparseBinaryMatrix.from_triplets(pairs, len(user_ids), len(app_names))
    dataset = _apply_filters(
        matrix, records, app_ids, app_names, app_cats, user_ids, manifest.min_users_per_app
    )
    if verbose:
        s = dataset.summary()
        print(
            f"ingested {s['users']} users, {s['apps']} apps, "
            f"{s['mean_apps_per_user']:.1f} mean apps/user"
        )
    return dataset


def _apply_filters(matrix, records, app_ids, app_names, app_cats, user_ids, min_users) -> Dataset:
    keep_apps = np.nonzero(matrix.column_support() >= min_users)[0]
    matrix = matrix.select("cols", keep_apps)
    app_ids = [app_ids[j] for j in keep_apps.tolist()]
    app_names = [app_names[j] for j in keep_apps.tolist()]
    app_cats = [app_cats[j] for j in keep_apps.tolist()]
    keep_users = np.nonzero(matrix.row_counts() > 0)[0]
    if len(keep_users) < matrix.n_rows:
        matrix = matrix.select("rows", keep_users)
        user_ids = [user_ids[i] for i in keep_users.tolist()]
        old_records = {r.user_row: r for r in records}
        records = [
            DemographicRecord(
                user_row=new,
                **{a: getattr(old_records[int(old)], a) for a in ATTRIBUTES},
            )
            for new, old in enumerate(keep_users)
        ]
    cat_names = tuple(sorted(set(app_cats)))
    cat_of = {name: c for c, name in enumerate(cat_names)}
    cmap = CategoryMap(
        category_ids=np.array([cat_of[c] for c in app_cats], dtype=np.int32),
        names=cat_names,
    )
    return Dataset(matrix, records, app_names, cmap, user_ids, app_ids)


def export_dataset(dataset, directory) -> None:
    """Write users.csv, usage.csv, and apps.csv for `dataset`."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with _atomic_writer(directory / USERS_CSV) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_USER_FIELDS)
        for uid, rec in zip(dataset.user_ids, dataset.records):
            w.writerow(
                [uid]
                + ["" if getattr(rec, a) is None else str(getattr(rec, a)) for a in ATTRIBUTES]
            )
    app_ids = getattr(dataset, "app_ids", None) or dataset.app_names
    with _atomic_writer(directory / APPS_CSV) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["app_id", "app_name", "category"])
        for j, name in enumerate(dataset.app_names):
            cat = dataset.categories.names[dataset.categories.category_ids[j]]
            w.writerow([app_ids[j], name, cat])
    with _atomic_writer(directory / USAGE_CSV) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "app_id"])
        for i, j in dataset.matrix.triplets():
            w.writerow([dataset.user_ids[i], app_ids[j]])


class _atomic_writer:
    """Write to <path>.tmp and rename into place on success."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.tmp = self.path.with_name(self.path.name + ".tmp")

    def __enter__(self):
        self.fh = open(self.tmp, "w", newline="", encoding="utf-8")
        return self.fh

    def __exit__(self, exc_type, exc, tb):
        self.fh.close()
        if exc_type is None:
            os.replace(self.tmp, self.path)
        else:
            self.tmp.unlink(missing_ok=True)
        return False
