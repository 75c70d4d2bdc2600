"""Zoo table loading and board generation."""
import io

import pytest

from nsl.datasets import (ZOO_FEATURES, ZOO_LABELS, SudokuBoard,
                          board_is_valid, generate_sudoku_dataset, load_zoo,
                          read_boards, sudoku_background, violating_pairs,
                          write_boards)
from nsl.errors import ParseError


def test_zoo_loads_101_records():
    records = load_zoo()
    assert len(records) == 101
    assert {r.label for r in records} == set(ZOO_LABELS)
    assert all(set(dict(r.features)) == set(ZOO_FEATURES) for r in records)


def test_zoo_mammal_row():
    records = load_zoo()
    lion = next(r for r in records if r.name == "lion")
    assert lion.label == "mammal"
    assert lion.feature_map["milk"] == 1 and lion.feature_map["hair"] == 1


def test_zoo_rejects_out_of_domain_legs():
    row = "weird,0,0,1,0,0,0,0,0,0,1,0,0,7,0,0,0,7\n"
    with pytest.raises(ParseError) as exc:
        load_zoo(io.StringIO(row))
    assert "legs" in str(exc.value)


def test_zoo_rejects_wrong_column_count():
    with pytest.raises(ParseError):
        load_zoo(io.StringIO("a,b,c\n"))


def test_generate_dataset_counts_and_labels_verified():
    boards = generate_sudoku_dataset(60, 60, seed=5)
    assert len(boards) == 120
    for b in boards:
        pairs = violating_pairs(b.cells)
        if b.label == "invalid":
            assert len(pairs) >= 1
        else:
            assert pairs == []
        assert 0 < len(b.filled()) < 16  # never a completed board


def test_generate_deterministic_per_seed():
    a = generate_sudoku_dataset(20, 20, seed=9)
    b = generate_sudoku_dataset(20, 20, seed=9)
    c = generate_sudoku_dataset(20, 20, seed=10)
    assert a == b
    assert a != c


def test_board_checker_agrees_with_validity():
    cells = [None] * 16
    cells[0], cells[1] = 2, 2  # same row
    assert not board_is_valid(cells)
    cells[1] = 3
    assert board_is_valid(cells)
    cells[4] = 2  # c1 and c5 share a column
    assert not board_is_valid(cells)


def test_background_relations_shape():
    bg = sudoku_background()
    assert len(bg.rules) == 144  # 3 relations x 4 units x 4x3 ordered pairs
    assert bg.is_facts_only()
    preds = {a.predicate for a in bg.fact_atoms}
    assert preds == {"same_row", "same_col", "same_block"}
    assert all(a.args[0] != a.args[1] for a in bg.fact_atoms)


def test_boards_file_round_trip(tmp_path):
    boards = generate_sudoku_dataset(10, 10, seed=3)
    path = tmp_path / "boards.txt"
    write_boards(boards, path)
    back = read_boards(path)
    assert back == boards
    first = path.read_text().splitlines()[0]
    grid, label = first.split(",")
    assert len(grid) == 16 and label in ("valid", "invalid")


def test_boards_file_validation():
    with pytest.raises(ParseError):
        read_boards(io.StringIO("123,valid\n"))
    with pytest.raises(ParseError):
        read_boards(io.StringIO("12345678901234567890\n"))
    with pytest.raises(ParseError):
        read_boards(io.StringIO("1.x.............,valid\n"))


def test_board_cell_validation():
    with pytest.raises(ValueError):
        SudokuBoard((5,) + (None,) * 15, "valid")
    with pytest.raises(ValueError):
        SudokuBoard((None,) * 16, "maybe")
