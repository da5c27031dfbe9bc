"""Stock two-element structures and operations used throughout the tests
and experiments."""

from __future__ import annotations

from .algebra import OperationTable, Relation, RelationalStructure

EQ2 = Relation.of(2, [(0, 0), (1, 1)])
NEQ2 = Relation.of(2, [(0, 1), (1, 0)])
IMP2 = Relation.of(2, [(0, 0), (0, 1), (1, 1)])
C0 = Relation.of(1, [(0,)])
C1 = Relation.of(1, [(1,)])

# two-coloring with constants
AK2 = RelationalStructure(2, {"NEQ": NEQ2, "C0": C0, "C1": C1})
# the same plus explicit equality
AZ2 = RelationalStructure(2, {"EQ": EQ2, "NEQ": NEQ2, "C0": C0, "C1": C1})
# implication with constants: not n-permutable for any n
AIMP = RelationalStructure(2, {"IMP": IMP2, "C0": C0, "C1": C1})

XOR3 = OperationTable.from_function(2, 3, lambda x, y, z: x ^ y ^ z)
MAJ3 = OperationTable.from_function(2, 3, lambda x, y, z: (x + y + z) // 2)

STRUCTURES = {"AK2": AK2, "AZ2": AZ2, "AIMP": AIMP}
