#!/usr/bin/env python3
"""Convert public citation-network distributions into the canonical layout
(edges.tsv / features.csv / labels.txt / meta.json) under data/<name>/.

Two input formats are supported:

1. The pickled split format (files ind.<name>.x/tx/allx/y/ty/ally/graph plus
   ind.<name>.test.index), as distributed at
   https://github.com/kimiyoung/planetoid/tree/master/data

   python scripts/convert_planetoid.py ind /path/to/raw cora data/cora

2. The content/cites format (<name>.content with "id feat... label" rows and
   <name>.cites with "citing cited" rows), as distributed at
   https://linqs.org/datasets/

   python scripts/convert_planetoid.py content /path/to/cora cora data/cora

This is a development tool: it needs the raw files you downloaded yourself;
nothing is fetched from the network.
"""

import argparse
import json
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def convert_ind(raw_dir: Path, name: str):
    """Rebuild the full feature/label matrices from the pickled split files."""
    objs = {}
    for suffix in ("x", "y", "tx", "ty", "allx", "ally", "graph"):
        path = raw_dir / f"ind.{name}.{suffix}"
        with open(path, "rb") as fh:
            objs[suffix] = pickle.load(fh, encoding="latin1")
    test_idx = np.loadtxt(raw_dir / f"ind.{name}.test.index", dtype=np.int64)
    test_range = np.arange(test_idx.min(), test_idx.max() + 1)

    allx = sp.csr_matrix(objs["allx"])
    tx = sp.csr_matrix(objs["tx"])
    ally = np.asarray(objs["ally"])
    ty = np.asarray(objs["ty"])

    # Some datasets have isolated test nodes missing from test.index; pad the
    # test block to the full index range, then place rows at their real ids.
    tx_full = sp.lil_matrix((test_range.size, allx.shape[1]))
    tx_full[test_idx - test_idx.min()] = tx
    ty_full = np.zeros((test_range.size, ty.shape[1]))
    ty_full[test_idx - test_idx.min()] = ty

    features = sp.vstack([allx, tx_full]).toarray()
    labels_1hot = np.vstack([ally, ty_full])
    n = features.shape[0]

    edges = []
    for u, neighbors in objs["graph"].items():
        for v in neighbors:
            if u != v and u < n and v < n:
                edges.append((int(u), int(v)))
    # all-zero label rows (padded isolated nodes) fall back to class 0
    labels = labels_1hot.argmax(axis=1)
    return features, labels.astype(np.int64), edges


def convert_content(raw_dir: Path, name: str):
    """Parse <name>.content / <name>.cites; node ids follow content order."""
    content = raw_dir / f"{name}.content"
    cites = raw_dir / f"{name}.cites"
    ids, rows, label_names = [], [], []
    with open(content, "r", encoding="utf-8") as fh:
        for line in fh:
            parts = line.strip().split()
            if not parts:
                continue
            ids.append(parts[0])
            rows.append([float(v) for v in parts[1:-1]])
            label_names.append(parts[-1])
    id_to_index = {node_id: i for i, node_id in enumerate(ids)}
    classes = {c: i for i, c in enumerate(sorted(set(label_names)))}
    labels = np.array([classes[c] for c in label_names], dtype=np.int64)
    features = np.array(rows)

    edges = []
    skipped = 0
    with open(cites, "r", encoding="utf-8") as fh:
        for line in fh:
            parts = line.strip().split()
            if len(parts) != 2:
                continue
            try:
                edges.append((id_to_index[parts[0]], id_to_index[parts[1]]))
            except KeyError:
                skipped += 1  # citations to papers without content rows
    if skipped:
        print(f"note: skipped {skipped} citation(s) to unknown ids", file=sys.stderr)
    return features, labels, edges


def write_canonical(out_dir: Path, name: str, features, labels, edges) -> None:
    sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))
    from dpgnn.data import Dataset, save_dataset
    from dpgnn.graph import build_graph, edge_homophily

    ds = Dataset(
        graph=build_graph(edges, features.shape[0]),
        features=np.asarray(features, dtype=np.float64),
        labels=labels,
        num_classes=int(labels.max()) + 1,
        name=name,
    )
    save_dataset(ds, out_dir)
    print(
        f"{name}: n={ds.num_nodes} d={ds.num_features} C={ds.num_classes} "
        f"undirected_edges={ds.graph.num_edges} homophily={edge_homophily(ds.graph, ds.labels):.4f}"
    )
    print(f"wrote {out_dir}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("format", choices=["ind", "content"], help="raw distribution format")
    parser.add_argument("raw_dir", type=Path, help="directory with the raw files")
    parser.add_argument("name", help="dataset name, e.g. cora or citeseer")
    parser.add_argument("out_dir", type=Path, help="output dataset directory")
    args = parser.parse_args(argv)

    if args.format == "ind":
        features, labels, edges = convert_ind(args.raw_dir, args.name)
    else:
        features, labels, edges = convert_content(args.raw_dir, args.name)
    write_canonical(args.out_dir, args.name, features, labels, edges)
    return 0


if __name__ == "__main__":
    sys.exit(main())
