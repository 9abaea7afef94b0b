#!/usr/bin/env python3
"""Convert the raw UCI Adult files into the 123-feature binary a9a layout.

Continuous attributes are discretized into training-set quantiles (5 bins,
or zero / non-zero for the capital columns); each categorical attribute with
m values becomes m indicator features. Missing values ('?') set no feature.

usage: adult_to_a9a.py ADULT_DIR OUT_DIR
  reads ADULT_DIR/adult.data and ADULT_DIR/adult.test,
  writes OUT_DIR/a9a and OUT_DIR/a9a.t in LIBSVM format.
"""

import bisect
import os
import sys

CATEGORIES = {
    "workclass": "Private, Self-emp-not-inc, Self-emp-inc, Federal-gov, Local-gov, State-gov, Without-pay, Never-worked",
    "education": "Bachelors, Some-college, 11th, HS-grad, Prof-school, Assoc-acdm, Assoc-voc, 9th, 7th-8th, 12th, Masters, 1st-4th, 10th, Doctorate, 5th-6th, Preschool",
    "marital-status": "Married-civ-spouse, Divorced, Never-married, Separated, Widowed, Married-spouse-absent, Married-AF-spouse",
    "occupation": "Tech-support, Craft-repair, Other-service, Sales, Exec-managerial, Prof-specialty, Handlers-cleaners, Machine-op-inspct, Adm-clerical, Farming-fishing, Transport-moving, Priv-house-serv, Protective-serv, Armed-Forces",
    "relationship": "Wife, Own-child, Husband, Not-in-family, Other-relative, Unmarried",
    "race": "White, Asian-Pac-Islander, Amer-Indian-Eskimo, Other, Black",
    "sex": "Female, Male",
    "native-country": "United-States, Cambodia, England, Puerto-Rico, Canada, Germany, Outlying-US(Guam-USVI-etc), India, Japan, Greece, South, China, Cuba, Iran, Honduras, Philippines, Italy, Poland, Jamaica, Vietnam, Mexico, Portugal, Ireland, France, Dominican-Republic, Laos, Ecuador, Taiwan, Haiti, Columbia, Hungary, Guatemala, Nicaragua, Scotland, Thailand, Yugoslavia, El-Salvador, Trinadad&Tobago, Peru, Hong, Holand-Netherlands",
}

# (name, kind, bins) in file column order
COLUMNS = [
    ("age", "quantile", 5),
    ("workclass", "cat", None),
    ("fnlwgt", "quantile", 5),
    ("education", "cat", None),
    ("education-num", "quantile", 5),
    ("marital-status", "cat", None),
    ("occupation", "cat", None),
    ("relationship", "cat", None),
    ("race", "cat", None),
    ("sex", "cat", None),
    ("capital-gain", "nonzero", 2),
    ("capital-loss", "nonzero", 2),
    ("hours-per-week", "quantile", 5),
    ("native-country", "cat", None),
]


def read_rows(path):
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("|"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 15:
                continue
            label = 1 if parts[14].rstrip(".") == ">50K" else -1
            rows.append((parts[:14], label))
    return rows


def quantile_cuts(values, bins):
    values = sorted(values)
    n = len(values)
    return [values[min(n - 1, (n * k) // bins)] for k in range(1, bins)]


def build_encoder(train_rows):
    encoders = []
    offset = 1
    for col, (name, kind, bins) in enumerate(COLUMNS):
        if kind == "cat":
            levels = [v.strip() for v in CATEGORIES[name].split(",")]
            encoders.append((kind, offset, {v: i for i, v in enumerate(levels)}))
            offset += len(levels)
        elif kind == "nonzero":
            encoders.append((kind, offset, None))
            offset += 2
        else:
            vals = [float(r[col]) for r, _ in train_rows if r[col] != "?"]
            encoders.append((kind, offset, quantile_cuts(vals, bins)))
            offset += bins
    return encoders, offset - 1


def encode(row, encoders):
    idx = []
    for value, (kind, offset, table) in zip(row, encoders):
        if value == "?":
            continue
        if kind == "cat":
            if value in table:
                idx.append(offset + table[value])
        elif kind == "nonzero":
            idx.append(offset + (1 if float(value) > 0 else 0))
        else:
            idx.append(offset + bisect.bisect_right(table, float(value)))
    return idx


def write(path, rows, encoders):
    with open(path, "w") as fh:
        for row, label in rows:
            feats = " ".join(f"{i}:1" for i in encode(row, encoders))
            fh.write(f"{label:+d} {feats}\n")


def main():
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    src, dst = sys.argv[1], sys.argv[2]
    train = read_rows(os.path.join(src, "adult.data"))
    test = read_rows(os.path.join(src, "adult.test"))
    encoders, dim = build_encoder(train)
    assert dim == 123, dim
    os.makedirs(dst, exist_ok=True)
    write(os.path.join(dst, "a9a"), train, encoders)
    write(os.path.join(dst, "a9a.t"), test, encoders)
    print(f"train={len(train)} test={len(test)} dim={dim}")


if __name__ == "__main__":
    main()
