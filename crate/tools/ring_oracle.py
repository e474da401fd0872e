#!/usr/bin/env python3
"""Fill the rings=/components= fields of the parser reference dump.

Ring sizes come from networkx's minimum_cycle_basis, an implementation
independent of the crate under test. Every minimum cycle basis of a graph has
the same multiset of cycle lengths, so sorted sizes are comparable across
implementations even when tie-breaking differs.

Usage: ring_oracle.py <in.tsv> <out.tsv>
"""
import sys

import networkx as nx


def main() -> None:
    if len(sys.argv) != 3:
        sys.exit("usage: ring_oracle.py <in.tsv> <out.tsv>")
    with open(sys.argv[1]) as fh:
        lines = fh.read().splitlines()

    out = []
    i = 0
    while i < len(lines):
        line = lines[i]
        if not line.startswith("mol\t"):
            out.append(line)
            i += 1
            continue
        header = line.split("\t")
        n_atoms = int(header[3].split("=")[1])
        block = []
        j = i + 1
        while j < len(lines) and not lines[j].startswith("mol\t"):
            block.append(lines[j])
            j += 1
        g = nx.Graph()
        g.add_nodes_from(range(n_atoms))
        for b in block:
            parts = b.split("\t")
            if parts[0] == "bond":
                g.add_edge(int(parts[1]), int(parts[2]))
        sizes = sorted(len(c) for c in nx.minimum_cycle_basis(g))
        rings = ",".join(str(s) for s in sizes) if sizes else "-"
        comps = nx.number_connected_components(g)
        header[5] = f"rings={rings}"
        header[6] = f"components={comps}"
        out.append("\t".join(header))
        out.extend(block)
        i = j

    with open(sys.argv[2], "w") as fh:
        fh.write("\n".join(out) + "\n")
    print(f"filled ring data for {sum(1 for l in out if l.startswith('mol'))} molecules")


if __name__ == "__main__":
    main()
