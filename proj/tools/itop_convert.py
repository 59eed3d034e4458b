#!/usr/bin/env python3
"""Convert the ITOP HDF5 archives into the native recording layout.

    itop_convert.py ITOP_side_train_point_cloud.h5 ITOP_side_train_labels.h5 out/

Frame ids look like "SS_NNNNN". Frames of one subject with consecutive numbers
form a recording. Zero points (no depth) are dropped. A frame flagged invalid
gets all joints marked invalid.
"""

import argparse
import os
import struct
import sys

import h5py
import numpy as np


def decode(raw):
    return raw.decode() if isinstance(raw, bytes) else str(raw)


def recordings(ids):
    """Yield (subject, [row indices]) runs of consecutive frame numbers."""
    keyed = sorted((decode(x).split("_")[0], int(decode(x).split("_")[1]), i) for i, x in enumerate(ids))
    run, prev = [], None
    for subject, number, row in keyed:
        if prev is not None and (subject != prev[0] or number != prev[1] + 1):
            yield prev[0], run
            run = []
        run.append(row)
        prev = (subject, number)
    if run:
        yield prev[0], run


def write_points(path, points):
    pts = np.asarray(points, dtype="<f4").reshape(-1, 3)
    with open(path, "wb") as f:
        f.write(b"SPPC")
        f.write(struct.pack("<I", len(pts)))
        f.write(pts.tobytes())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("points", help="ITOP *_point_cloud.h5")
    ap.add_argument("labels", help="ITOP *_labels.h5")
    ap.add_argument("out", help="output directory")
    args = ap.parse_args(argv)

    with h5py.File(args.points, "r") as pf, h5py.File(args.labels, "r") as lf:
        ids = [decode(x) for x in pf["id"][:]]
        label_ids = [decode(x) for x in lf["id"][:]]
        if ids != label_ids:
            sys.exit("point and label files list different frame ids")
        clouds = pf["data"]
        joints = lf["real_world_coordinates"][:]
        valid = lf["is_valid"][:]

        for r, (subject, rows) in enumerate(recordings(ids)):
            name = "%04d_%s_%03d" % (r, subject, r)
            rdir = os.path.join(args.out, name)
            os.makedirs(os.path.join(rdir, "points"), exist_ok=True)
            with open(os.path.join(rdir, "manifest.txt"), "w") as m:
                m.write("subject=%s recording=%03d frames=%d\n" % (subject, r, len(rows)))
            with open(os.path.join(rdir, "labels.txt"), "w") as lab:
                for row in rows:
                    cloud = np.asarray(clouds[row]).reshape(-1, 3)
                    cloud = cloud[cloud[:, 2] > 0]
                    write_points(os.path.join(rdir, "points", ids[row] + ".sppc"), cloud)
                    coords = ",".join("%.9g" % v for v in joints[row].reshape(-1))
                    bits = ("1" if valid[row] else "0") * 15
                    lab.write("frame=%s joints=%s valid=%s\n" % (ids[row], coords, bits))
    return 0


if __name__ == "__main__":
    sys.exit(main())
