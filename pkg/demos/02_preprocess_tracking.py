"""
From raw tracking rows to normalized routes
===========================================

Simulate a small tracking table, then cut each receiver's path from the
snap to the end of the pass, flip plays to a common direction, mirror
receivers onto one side of the ball and move each route to the origin.
"""

import csv
import io

from routemix.ingest import Diagnostics, parse_tracking, preprocess
from routemix.synth import TRACKING_COLUMNS, simulate_tracking

rows, truth = simulate_tracking(n_plays=25, seed=1)

buf = io.StringIO()
writer = csv.DictWriter(buf, TRACKING_COLUMNS, lineterminator="\n")
writer.writeheader()
writer.writerows(rows)

diagnostics = Diagnostics()
records = parse_tracking(io.StringIO(buf.getvalue()), diagnostics=diagnostics)
result = preprocess(records, diagnostics=diagnostics)

print(len(records), "records ->", len(result.curves), "routes")
# every record ends up in exactly one bucket
for disposition, count in sorted(result.accounting.items()):
    print(f"  {disposition:20s} {count}")

route = result.curves[0]
print(route.key, route.position_code, "mirrored" if route.was_mirrored else "not mirrored")
print("first points:", route.points[:3].round(2).tolist())
