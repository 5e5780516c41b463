"""Append-only results store: records.csv plus a JSON manifest."""

from __future__ import annotations

import csv
import json
import platform
from decimal import Decimal
from pathlib import Path

import gmpy2
import numpy as np

from .. import __version__
from ..exchange import ExchangeRecord
from ..mpkernel import PrecisionContext, to_str

FIELDS = ["R", "Omega", "method", "formula", "order", "digits", "J", "orders_summed"]


class StoreIntegrityError(RuntimeError):
    """Two rows share a key but disagree on J."""


def _key(R, Omega, method, formula, order, digits) -> tuple:
    return (str(R), str(Omega), method, formula, str(order), int(digits))


def _sort_key(k: tuple):
    R, Omega, method, formula, order, digits = k
    om = (1, 0) if Omega == "extrapolated" else (0, int(Omega))
    return (Decimal(R), om, method, formula, order, digits)


class ResultsStore:
    def __init__(self, directory):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.records_path = self.dir / "records.csv"
        self.manifest_path = self.dir / "manifest.json"
        self._rows: dict[tuple, dict] = {}
        if self.records_path.exists():
            with open(self.records_path, newline="") as fh:
                for row in csv.DictReader(fh):
                    self._merge(row)

    def __len__(self):
        return len(self._rows)

    def _merge(self, row: dict):
        k = _key(row["R"], row["Omega"], row["method"], row["formula"], row["order"], row["digits"])
        old = self._rows.get(k)
        if old is not None and old["J"] != row["J"]:
            ctx = PrecisionContext(int(row["digits"]))
            with ctx.activate():
                a, b = gmpy2.mpfr(old["J"]), gmpy2.mpfr(row["J"])
                if abs(a - b) > abs(a) * gmpy2.mpfr(10) ** (-ctx.digits + 10):
                    raise StoreIntegrityError(f"conflicting J for {k}: {old['J']} vs {row['J']}")
        self._rows[k] = row

    def add(self, rec: ExchangeRecord):
        self._merge({
            "R": str(rec.R), "Omega": str(rec.Omega), "method": rec.method, "formula": rec.formula,
            "order": str(rec.order), "digits": str(rec.digits),
            "J": rec.J if isinstance(rec.J, str) else to_str(rec.J),
            "orders_summed": str(rec.provenance.get("orders", "")),
        })

    def has(self, R, Omega, method, formula, order, digits) -> bool:
        return _key(R, Omega, method, formula, order, digits) in self._rows

    def get(self, R, Omega, method, formula, order, digits) -> dict | None:
        return self._rows.get(_key(R, Omega, method, formula, order, digits))

    def rows(self) -> list:
        return [self._rows[k] for k in sorted(self._rows, key=_sort_key)]

    def flush(self):
        """Rewrite records.csv in canonical order (byte-identical for identical content)."""
        tmp = self.records_path.with_suffix(".tmp")
        with open(tmp, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=FIELDS, lineterminator="\n")
            w.writeheader()
            for row in self.rows():
                w.writerow(row)
        tmp.replace(self.records_path)

    def write_manifest(self, config: dict, **extra):
        manifest = {
            "package": "h2plus_exchange",
            "version": __version__,
            "python": platform.python_version(),
            "gmpy2": gmpy2.version(),
            "mpfr": gmpy2.mpfr_version(),
            "numpy": np.__version__,
            "config": config,
        }
        manifest.update(extra)
        with open(self.manifest_path, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
