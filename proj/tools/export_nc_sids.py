#!/usr/bin/env python3
"""Export the North Carolina SIDS table into mvcar's text formats.

Source: the ``sids2`` example bundled in the libpysal wheel (Cressie 1993,
Statistics for Spatial Data, pp. 386-389). Queen contiguity is rebuilt from
shared polygon vertices of the shapefile (two counties are neighbours when
their boundaries share at least one vertex), which reproduces the 490 links of
``spdep::poly2nb`` with its default queen rule.

Writes, into the output directory:
  adjacency.txt     regions: 100 + one "i j" line per edge
  births.csv        region,variable,observed,population,nwprop (raw table)
  sids.csv          region,variable,observed,expected
  sids_nwprop.csv   region,variable,observed,expected,cov_nwprop

Usage:
  pip download libpysal --no-deps -d /tmp/pysal
  python3 tools/export_nc_sids.py /tmp/pysal/libpysal-*.whl data/nc_sids
"""

import itertools
import struct
import sys
import zipfile
from pathlib import Path


def read_dbf(raw):
    n_records, header_len, record_len = struct.unpack("<IHH", raw[4:12])
    fields = []
    pos = 32
    while raw[pos] != 0x0D:
        name = raw[pos:pos + 11].split(b"\0")[0].decode()
        fields.append((name, chr(raw[pos + 11]), raw[pos + 16]))
        pos += 32
    rows = []
    for r in range(n_records):
        start = header_len + r * record_len + 1  # skip deletion flag
        row = {}
        for name, kind, length in fields:
            text = raw[start:start + length].decode("latin-1").strip()
            start += length
            row[name] = float(text) if kind == "N" else text
        rows.append(row)
    return rows


def read_polygon_vertices(raw):
    polys = []
    pos = 100
    while pos < len(raw):
        _, content_len = struct.unpack(">ii", raw[pos:pos + 8])
        rec = raw[pos + 8:pos + 8 + 2 * content_len]
        pos += 8 + 2 * content_len
        n_parts, n_points = struct.unpack("<ii", rec[36:44])
        off = 44 + 4 * n_parts
        polys.append({struct.unpack("<dd", rec[off + 16 * i:off + 16 * i + 16])
                      for i in range(n_points)})
    return polys


def main():
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    wheel, out = Path(sys.argv[1]), Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(wheel) as z:
        dbf = z.read("libpysal/examples/sids2/sids2.dbf")
        shp = z.read("libpysal/examples/sids2/sids2.shp")
    rows = read_dbf(dbf)
    polys = read_polygon_vertices(shp)
    assert len(rows) == len(polys) == 100

    edges = [(i + 1, j + 1) for i, j in itertools.combinations(range(100), 2)
             if polys[i] & polys[j]]
    with open(out / "adjacency.txt", "w") as f:
        f.write("# North Carolina counties, queen contiguity from sids2.shp\n")
        f.write("regions: 100\n")
        for i, j in edges:
            f.write(f"{i} {j}\n")

    periods = [("74", "SID74", "BIR74", "NWBIR74"), ("79", "SID79", "BIR79", "NWBIR79")]
    with open(out / "births.csv", "w") as f:
        f.write("region,variable,observed,population,nwprop\n")
        for label, sid, bir, nw in periods:
            for i, row in enumerate(rows):
                f.write(f"{i + 1},{label},{int(row[sid])},{int(row[bir])},"
                        f"{row[nw] / row[bir]:.17g}\n")

    with open(out / "sids.csv", "w") as plain, open(out / "sids_nwprop.csv", "w") as cov:
        plain.write("region,variable,observed,expected\n")
        cov.write("region,variable,observed,expected,cov_nwprop\n")
        for label, sid, bir, nw in periods:
            rate = sum(r[sid] for r in rows) / sum(r[bir] for r in rows)
            for i, row in enumerate(rows):
                line = f"{i + 1},{label},{int(row[sid])},{rate * row[bir]:.17g}"
                plain.write(line + "\n")
                cov.write(line + f",{row[nw] / row[bir]:.17g}\n")
    print(f"wrote {len(edges)} edges and {2 * len(rows)} cells to {out}")


if __name__ == "__main__":
    main()
