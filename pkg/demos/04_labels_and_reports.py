"""
Naming clusters and counting routes
===================================

Fit to simulated tracking, then use a label map to condense the clusters
into route groups. Report usage per position and per three-receiver
design, and draw the cluster means as SVG.
"""

import csv
import io
import tempfile
from pathlib import Path

from routemix.io import curve_metadata
from routemix.ingest import parse_tracking, preprocess
from routemix.labeling import apply_label_map, render_cluster_means, usage_report
from routemix.mixture import MixtureConfig, assign_all, fit
from routemix.synth import TRACKING_COLUMNS, default_templates, simulate_tracking

rows, _ = simulate_tracking(n_plays=150, seed=4)
buf = io.StringIO()
w = csv.DictWriter(buf, TRACKING_COLUMNS, lineterminator="\n")
w.writeheader()
w.writerows(rows)
curves = preprocess(parse_tracking(io.StringIO(buf.getvalue()))).curves

model, _ = fit(curves, K=8, config=MixtureConfig(seed=4))

# an analyst would name clusters after looking at the plot; here we cheat
# and name each cluster after the template whose end point is closest
templates = default_templates()
label_map = {}
for k, comp in enumerate(model.components, start=1):
    end = comp.theta[-1]
    label_map[k] = min(templates, key=lambda t: ((t.theta[-1] - end) ** 2).sum()).name

labeled = apply_label_map(assign_all(model, curves), label_map, K=model.K)
metadata = {c.key: curve_metadata(c) for c in curves}

print(usage_report(labeled, metadata, "position").to_csv())
print(usage_report(labeled, metadata, "design", wr_count=3).to_csv())

out = Path(tempfile.gettempdir()) / "cluster_means.svg"
out.write_text(render_cluster_means(model, label_map))
print("wrote", out)
