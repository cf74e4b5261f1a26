"""Regenerate the benchmark CSVs under ``data/``.

Balance Scale, Monks-2 and Tic-tac-toe are fully determined by their
generating rules and are rebuilt from scratch here. Iris comes from the
copy bundled with scikit-learn. Breast Cancer (Wisconsin, 699 rows) is
converted from the MASS ``biopsy`` table when a copy is given with
``--biopsy``; otherwise the committed file is left untouched.

    python scripts/make_datasets.py [--biopsy path/to/biopsy.csv]
"""

import argparse
import csv
import itertools
from pathlib import Path

DATA = Path(__file__).resolve().parent.parent / "data"

LINES = [(0, 1, 2), (3, 4, 5), (6, 7, 8), (0, 3, 6),
         (1, 4, 7), (2, 5, 8), (0, 4, 8), (2, 4, 6)]


def _write(name, header, rows):
    with open(DATA / name, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    print(f"{name}: {len(rows)} rows")


def balance_scale():
    rows = []
    for lw, ld, rw, rd in itertools.product(range(1, 6), repeat=4):
        left, right = lw * ld, rw * rd
        cls = "L" if left > right else "R" if left < right else "B"
        rows.append([lw, ld, rw, rd, cls])
    _write("balance_scale.csv",
           ["left_weight", "left_distance", "right_weight", "right_distance", "class"], rows)


def monks2():
    sizes = [3, 3, 2, 3, 4, 2]
    rows = []
    for values in itertools.product(*[range(1, s + 1) for s in sizes]):
        ones = sum(v == 1 for v in values)
        rows.append([*values, int(ones == 2)])
    _write("monks2.csv", [f"a{i}" for i in range(1, 7)] + ["class"], rows)


def _winner(board):
    for a, b, c in LINES:
        if board[a] != "b" and board[a] == board[b] == board[c]:
            return board[a]
    return None


def tic_tac_toe():
    # every distinct board at which a game started by x ends
    finals = set()

    def play(board, player):
        if _winner(board) or "b" not in board:
            finals.add(tuple(board))
            return
        for i in range(9):
            if board[i] == "b":
                board[i] = player
                play(board, "o" if player == "x" else "x")
                board[i] = "b"

    play(["b"] * 9, "x")
    rows = [[*b, "positive" if _winner(b) == "x" else "negative"] for b in sorted(finals)]
    squares = ["top_left", "top_middle", "top_right", "middle_left", "middle_middle",
               "middle_right", "bottom_left", "bottom_middle", "bottom_right"]
    _write("tic_tac_toe.csv", squares + ["class"], rows)


def iris():
    from sklearn.datasets import load_iris

    ds = load_iris()
    rows = [[*(f"{v:g}" for v in x), ds.target_names[t]] for x, t in zip(ds.data, ds.target)]
    _write("iris.csv", ["sepal_length", "sepal_width", "petal_length", "petal_width", "species"],
           rows)


def breast_cancer(path):
    names = ["clump_thickness", "cell_size", "cell_shape", "adhesion", "epithelial_size",
             "bare_nuclei", "chromatin", "nucleoli", "mitoses"]
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for rec in reader:
            feats = ["?" if v == "NA" else v for v in rec[2:11]]
            rows.append([*feats, rec[11]])
    _write("breast_cancer.csv", names + ["class"], rows)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--biopsy", type=Path, help="MASS biopsy.csv to convert")
    args = ap.parse_args()
    DATA.mkdir(exist_ok=True)
    balance_scale()
    monks2()
    tic_tac_toe()
    iris()
    if args.biopsy:
        breast_cancer(args.biopsy)


if __name__ == "__main__":
    main()
