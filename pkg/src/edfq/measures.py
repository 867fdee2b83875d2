"""Finite atomic measures on the real lead-time axis.

A measure is a finite set of point masses ("atoms").  Atom locations move
left at unit rate as time passes; instead of rewriting every location, the
measure stores a global time offset and reports *effective* locations
(stored location minus offset), so a drift is O(1) and shares atom storage
with the source measure.

Masses and locations may be floats or exact numbers (``fractions.Fraction``
or ints).  Exact values are compared exactly; floats use the module-level
``EPS_MASS`` tolerance to decide when a mass has been depleted.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence

EPS_MASS = 1e-9
_INF = float("inf")


def _exact(x) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


def is_zero_mass(x) -> bool:
    """True when a mass counts as depleted (exact zero, or |x| <= EPS_MASS)."""
    if _exact(x):
        return x == 0
    return abs(x) <= EPS_MASS


class MeasureError(ValueError):
    """Raised on invalid measure operations (negative mass, bad drift, ...)."""


class AtomicMeasure:
    """Immutable finite atomic measure with a lazy drift offset."""

    __slots__ = ("_atoms", "_offset")

    def __init__(self, pairs: Iterable[tuple] = (), offset=0):
        merged: dict = {}
        for loc, mass in pairs:
            if mass < 0 and not is_zero_mass(mass):
                raise MeasureError(f"atom mass must be positive, got {mass!r}")
            if is_zero_mass(mass):
                continue
            key = loc + offset  # store in drift-free coordinates
            if key in merged:
                merged[key] += mass
            else:
                merged[key] = mass
        self._atoms = tuple(sorted(merged.items()))
        self._offset = offset

    @classmethod
    def _from_stored(cls, atoms: Sequence[tuple], offset) -> "AtomicMeasure":
        m = cls.__new__(cls)
        m._atoms = tuple(atoms)
        m._offset = offset
        return m

    # -- queries ---------------------------------------------------------

    def atoms(self) -> tuple:
        """Atoms as ((effective location, mass), ...) sorted by location."""
        off = self._offset
        return tuple((loc - off, mass) for loc, mass in self._atoms)

    @property
    def n_atoms(self) -> int:
        return len(self._atoms)

    def __len__(self) -> int:
        return len(self._atoms)

    def __bool__(self) -> bool:
        return bool(self._atoms)

    def total(self):
        """Total mass."""
        if not self._atoms:
            return 0
        s = self._atoms[0][1]
        for _, mass in self._atoms[1:]:
            s = s + mass
        return s

    def mass_below(self, y):
        """Mass at effective locations <= y (right-continuous in y)."""
        cutoff = y + self._offset
        s = 0
        for loc, mass in self._atoms:
            if loc > cutoff:
                break
            s = s + mass
        return s

    def mass_at(self, y):
        """Mass of the atom exactly at effective location y, else 0."""
        key = y + self._offset
        for loc, mass in self._atoms:
            if loc == key:
                return mass
            if loc > key:
                break
        return 0

    def mass_in(self, lo=-_INF, hi=_INF, include_lo: bool = False,
                include_hi: bool = True):
        """Mass on an interval; defaults to the half-open (lo, hi]."""
        lo_s = lo + self._offset
        hi_s = hi + self._offset
        s = 0
        for loc, mass in self._atoms:
            above = loc > lo_s or (include_lo and loc == lo_s)
            below = loc < hi_s or (include_hi and loc == hi_s)
            if above and below:
                s = s + mass
            if loc > hi_s:
                break
        return s

    def support_min(self):
        """Leftmost effective atom location; +inf for the zero measure."""
        if not self._atoms:
            return _INF
        return self._atoms[0][0] - self._offset

    def support_max(self):
        if not self._atoms:
            return -_INF
        return self._atoms[-1][0] - self._offset

    # -- constructive operations -----------------------------------------

    def drift(self, dt) -> "AtomicMeasure":
        """Move every atom left by dt >= 0; O(1), shares atom storage."""
        if dt < 0:
            raise MeasureError(f"drift requires dt >= 0, got {dt!r}")
        return AtomicMeasure._from_stored(self._atoms, self._offset + dt)

    def add_atom(self, loc, mass) -> "AtomicMeasure":
        """Insert mass at an effective location, merging equal locations."""
        if mass <= 0 or is_zero_mass(mass):
            raise MeasureError(f"atom mass must be positive, got {mass!r}")
        key = loc + self._offset
        out = []
        placed = False
        for sloc, smass in self._atoms:
            if not placed and sloc == key:
                out.append((sloc, smass + mass))
                placed = True
            elif not placed and sloc > key:
                out.append((key, mass))
                out.append((sloc, smass))
                placed = True
            else:
                out.append((sloc, smass))
        if not placed:
            out.append((key, mass))
        return AtomicMeasure._from_stored(out, self._offset)

    def remove_leftmost_mass(self, amount) -> "AtomicMeasure":
        """Deplete atoms left to right until `amount` has been removed.

        A partially depleted atom keeps its location.  `amount` may exceed
        the total only within the zero-mass tolerance.
        """
        if amount < 0 and not is_zero_mass(amount):
            raise MeasureError(f"amount must be >= 0, got {amount!r}")
        if amount <= 0 or is_zero_mass(amount):
            return self
        remaining = amount
        atoms = list(self._atoms)
        i = 0
        for i, (loc, mass) in enumerate(atoms):
            if remaining < mass:
                leftover = mass - remaining
                if is_zero_mass(leftover):
                    return AtomicMeasure._from_stored(atoms[i + 1:], self._offset)
                return AtomicMeasure._from_stored(
                    [(loc, leftover)] + atoms[i + 1:], self._offset)
            remaining = remaining - mass
        if not is_zero_mass(remaining):
            raise MeasureError(
                f"cannot remove {amount!r} from measure of total {self.total()!r}")
        return AtomicMeasure._from_stored((), self._offset)

    def restrict(self, lo=-_INF, hi=_INF, include_lo: bool = False,
                 include_hi: bool = True) -> "AtomicMeasure":
        """Keep only atoms inside an interval; defaults to (lo, hi]."""
        lo_s = lo + self._offset
        hi_s = hi + self._offset
        kept = []
        for loc, mass in self._atoms:
            above = loc > lo_s or (include_lo and loc == lo_s)
            below = loc < hi_s or (include_hi and loc == hi_s)
            if above and below:
                kept.append((loc, mass))
        return AtomicMeasure._from_stored(kept, self._offset)

    # -- comparison / serialization ---------------------------------------

    def __eq__(self, other) -> bool:
        if not isinstance(other, AtomicMeasure):
            return NotImplemented
        return self.atoms() == other.atoms()

    def __hash__(self):
        return hash(self.atoms())

    def discrepancy(self, other: "AtomicMeasure", loc_tol: float = EPS_MASS):
        """Largest atomwise mass mismatch, matching locations within loc_tol.

        Unmatched atoms count with their full mass.  Returns a float.
        """
        a = list(self.atoms())
        b = list(other.atoms())
        worst = 0.0
        i = j = 0
        while i < len(a) and j < len(b):
            la, ma = a[i]
            lb, mb = b[j]
            if abs(float(la) - float(lb)) <= loc_tol:
                worst = max(worst, abs(float(ma) - float(mb)))
                i += 1
                j += 1
            elif la < lb:
                worst = max(worst, abs(float(ma)))
                i += 1
            else:
                worst = max(worst, abs(float(mb)))
                j += 1
        for _, m in a[i:]:
            worst = max(worst, abs(float(m)))
        for _, m in b[j:]:
            worst = max(worst, abs(float(m)))
        return worst

    def to_csv_rows(self) -> list[str]:
        """Serialize as ``location,mass`` rows at 17 significant digits."""
        return [f"{float(loc):.17g},{float(mass):.17g}"
                for loc, mass in self.atoms()]

    @classmethod
    def from_csv_rows(cls, rows: Iterable[str]) -> "AtomicMeasure":
        pairs = []
        for row in rows:
            loc_s, mass_s = row.strip().split(",")
            pairs.append((float(loc_s), float(mass_s)))
        return cls(pairs)

    def __repr__(self) -> str:
        inside = ", ".join(f"({loc!r}: {mass!r})" for loc, mass in self.atoms())
        return f"AtomicMeasure[{inside}]"
