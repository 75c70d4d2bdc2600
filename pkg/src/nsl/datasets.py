"""Benchmark datasets: the zoo animal table and generated 4x4 boards.

The zoo task keeps nine attributes of the classic 101-animal table and its
seven class labels.  The board task generates partially filled 4x4 grids
labelled valid/invalid by the row/column/block no-duplicate property, with
an independent brute-force pair checker used to verify every label.
"""
from __future__ import annotations

import importlib.resources
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Sequence, Union

import numpy as np

from .errors import ParseError
from .learner import LanguageBias, ModeDecl
from .logic import LogicProgram, parse_program

__all__ = [
    "ZOO_FEATURES", "ZOO_LABELS", "ZOO_DOMAINS", "ZooRecord", "load_zoo",
    "zoo_bias", "zoo_background", "SudokuBoard", "CELL_NAMES", "UNITS",
    "violating_pairs", "board_is_valid", "generate_sudoku_dataset",
    "sudoku_background", "sudoku_bias", "read_boards", "write_boards",
]

# ---------------------------------------------------------------------------
# Zoo
# ---------------------------------------------------------------------------

ZOO_FEATURES = ("hair", "feathers", "eggs", "milk", "aquatic", "predator",
                "fins", "legs", "tail")

#: Class ids 1..7 in the source table's order.
ZOO_LABELS = ("mammal", "bird", "reptile", "fish", "amphibian", "bug",
              "invertebrate")

ZOO_DOMAINS = {f: (0, 1) for f in ZOO_FEATURES} | {"legs": (0, 2, 4, 5, 6, 8)}

# Column positions of the selected features in the 18-column source layout
# (name, 16 boolean/numeric attributes, class id).
_ZOO_COLUMNS = {"hair": 1, "feathers": 2, "eggs": 3, "milk": 4, "aquatic": 6,
                "predator": 7, "fins": 12, "legs": 13, "tail": 14}


@dataclass(frozen=True)
class ZooRecord:
    name: str
    features: tuple[tuple[str, int], ...]
    label: str

    @property
    def feature_map(self) -> dict[str, int]:
        return dict(self.features)


def load_zoo(source: Union[str, Path, IO[str], None] = None) -> list[ZooRecord]:
    """Parse the zoo table (UCI layout, 18 comma-separated columns, no header).

    With no source, the packaged copy is used.
    """
    if source is None:
        text = (importlib.resources.files("nsl") / "data" / "zoo.csv").read_text()
    elif isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
    records: list[ZooRecord] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 18:
            raise ParseError(f"expected 18 columns, found {len(parts)}", lineno)
        name = parts[0]
        try:
            values = {f: int(parts[i]) for f, i in _ZOO_COLUMNS.items()}
            class_id = int(parts[17])
        except ValueError as exc:
            raise ParseError(f"bad numeric value: {exc}", lineno) from None
        for f, v in values.items():
            if v not in ZOO_DOMAINS[f]:
                raise ParseError(f"{f}={v} outside domain {ZOO_DOMAINS[f]}", lineno)
        if not 1 <= class_id <= 7:
            raise ParseError(f"class id {class_id} outside 1..7", lineno)
        features = tuple((f, values[f]) for f in ZOO_FEATURES)
        records.append(ZooRecord(name, features, ZOO_LABELS[class_id - 1]))
    return records


def zoo_background() -> LogicProgram:
    return LogicProgram()


def zoo_bias(max_body_literals: int = 3) -> LanguageBias:
    """Ground attribute-value literals, one head schema per class label."""
    head = ModeDecl("class", (("const", "label"),))
    body = tuple(ModeDecl(f, (("const", f),)) for f in ZOO_FEATURES)
    pools = {"label": ZOO_LABELS} | {f: ZOO_DOMAINS[f] for f in ZOO_FEATURES}
    return LanguageBias.make([head], body, max_body_literals, 0, pools)


# ---------------------------------------------------------------------------
# 4x4 boards
# ---------------------------------------------------------------------------

CELL_NAMES = tuple(f"c{i + 1}" for i in range(16))


def _unit_indices() -> list[list[int]]:
    def idx(r: int, c: int) -> int:
        return r * 4 + c
    units = [[idx(r, c) for c in range(4)] for r in range(4)]
    units += [[idx(r, c) for r in range(4)] for c in range(4)]
    units += [[idx(br * 2 + dr, bc * 2 + dc) for dr in range(2) for dc in range(2)]
              for br in range(2) for bc in range(2)]
    return units


UNITS = _unit_indices()
_ROW_UNITS, _COL_UNITS, _BLOCK_UNITS = UNITS[:4], UNITS[4:8], UNITS[8:]


@dataclass(frozen=True)
class SudokuBoard:
    """A partially filled 4x4 board; ``cells[i]`` is 1..4 or None."""

    cells: tuple  # 16 entries
    label: str

    def __post_init__(self):
        if len(self.cells) != 16:
            raise ValueError("a board has 16 cells")
        for v in self.cells:
            if v is not None and v not in (1, 2, 3, 4):
                raise ValueError(f"cell value {v!r} outside 1..4")
        if self.label not in ("valid", "invalid"):
            raise ValueError(f"label {self.label!r} must be valid or invalid")

    def filled(self) -> dict[int, int]:
        return {i: v for i, v in enumerate(self.cells) if v is not None}


def violating_pairs(cells: Sequence) -> list[tuple[int, int]]:
    """All cell index pairs that share a unit and hold the same value.

    Brute-force over every pair; the independent oracle for board validity.
    """
    out = []
    for u in UNITS:
        filled = [(i, cells[i]) for i in u if cells[i] is not None]
        for a in range(len(filled)):
            for b in range(a + 1, len(filled)):
                if filled[a][1] == filled[b][1]:
                    out.append((filled[a][0], filled[b][0]))
    return out


def board_is_valid(cells: Sequence) -> bool:
    return not violating_pairs(cells)


def _complete_board(rng: np.random.Generator) -> list[int]:
    """A fully solved board via randomized backtracking."""
    cells: list = [None] * 16

    def ok(i: int, val: int) -> bool:
        for u in UNITS:
            if i in u and any(cells[j] == val for j in u if j != i):
                return False
        return True

    def rec(i: int) -> bool:
        if i == 16:
            return True
        values = [1, 2, 3, 4]
        rng.shuffle(values)
        for v in values:
            if ok(i, v):
                cells[i] = v
                if rec(i + 1):
                    return True
                cells[i] = None
        return False

    rec(0)
    return list(cells)


def generate_sudoku_dataset(n_valid: int, n_invalid: int, seed: int = 0,
                            min_filled: int = 3, max_filled: int = 10) -> list[SudokuBoard]:
    """Valid boards by partially erasing complete solutions; invalid boards by
    copying one filled value into an empty cell sharing a unit of a valid
    board.  Every label is verified with the brute-force pair checker.
    """
    if n_valid < 1 or n_invalid < 0:
        raise ValueError("need at least one valid board")
    rng = np.random.default_rng(seed)
    boards: list[SudokuBoard] = []
    valid_cells: list[list] = []
    for _ in range(n_valid):
        full = _complete_board(rng)
        m = int(rng.integers(min_filled, max_filled + 1))
        keep = set(rng.choice(16, size=m, replace=False).tolist())
        cells = [full[i] if i in keep else None for i in range(16)]
        assert board_is_valid(cells)
        valid_cells.append(cells)
        boards.append(SudokuBoard(tuple(cells), "valid"))
    for _ in range(n_invalid):
        src = valid_cells[int(rng.integers(0, len(valid_cells)))]
        cells = list(src)
        options = []
        for u in UNITS:
            for i in u:
                if cells[i] is None:
                    continue
                for j in u:
                    if j != i and cells[j] is None:
                        options.append((i, j))
        i, j = options[int(rng.integers(0, len(options)))]
        cells[j] = cells[i]
        assert violating_pairs(cells)
        boards.append(SudokuBoard(tuple(cells), "invalid"))
    return boards


def sudoku_background() -> LogicProgram:
    """same_row/same_col/same_block facts over the 16 cells (irreflexive,
    both orders)."""
    lines = []
    for name, units in (("same_row", _ROW_UNITS), ("same_col", _COL_UNITS),
                        ("same_block", _BLOCK_UNITS)):
        for u in units:
            for i in u:
                for j in u:
                    if i != j:
                        lines.append(f"{name}({CELL_NAMES[i]},{CELL_NAMES[j]}).")
    return parse_program("\n".join(lines))


def sudoku_bias(max_body_literals: int = 4, max_variables: int = 3) -> LanguageBias:
    return LanguageBias.make(
        [ModeDecl("invalid")],
        [ModeDecl("digit", (("var", "cell"), ("var", "value"))),
         ModeDecl("same_row", (("var", "cell"), ("var", "cell"))),
         ModeDecl("same_col", (("var", "cell"), ("var", "cell"))),
         ModeDecl("same_block", (("var", "cell"), ("var", "cell")))],
        max_body_literals, max_variables,
        allow_inequality=True)


def read_boards(source: Union[str, Path, IO[str]]) -> list[SudokuBoard]:
    """Board file: 16 characters per line (digits 1-4, '.' empty), a comma,
    and the label."""
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
    boards = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "," not in line:
            raise ParseError("expected '<16 cells>,<label>'", lineno)
        grid, label = line.split(",", 1)
        if len(grid) != 16:
            raise ParseError(f"expected 16 cell characters, found {len(grid)}", lineno)
        cells = []
        for ch in grid:
            if ch == ".":
                cells.append(None)
            elif ch in "1234":
                cells.append(int(ch))
            else:
                raise ParseError(f"bad cell character {ch!r}", lineno)
        try:
            boards.append(SudokuBoard(tuple(cells), label.strip()))
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    return boards


def write_boards(boards: Iterable[SudokuBoard], sink: Union[str, Path, IO[str]]) -> None:
    own = isinstance(sink, (str, Path))
    fh = open(sink, "w", encoding="utf-8") if own else sink
    try:
        for b in boards:
            grid = "".join("." if v is None else str(v) for v in b.cells)
            fh.write(f"{grid},{b.label}\n")
    finally:
        if own:
            fh.close()
