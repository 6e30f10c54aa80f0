"""
A small experiment table
========================

The harness runs every scheme over a step-size grid with several initial
points and runs, keeps the best grid point per scheme and writes one row
each. The same config always gives the same bytes.
"""

import tempfile
from pathlib import Path

from shufflelab.harness import emit_results, load_config, read_results, render_csv, run_experiment

config_text = """
problem = logreg n=500 d=10 seed=1
schemes = apr,rr,so,ig,block:0.1
gammas = 0.5,0.1,0.01
batch_size = 32
epochs = 20
n_inits = 2
n_runs = 2
base_seed = 42
"""

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "small.cfg"
    path.write_text(config_text)
    rows = run_experiment(load_config(path))
    print(render_csv(rows))

    again = run_experiment(load_config(path))
    print("rerun identical:", render_csv(rows) == render_csv(again))

    # values are written with nine significant digits, so compare the text
    out = Path(tmp) / "rows.json"
    emit_results(rows, "json", out)
    print("JSON read back renders the same:", render_csv(read_results(out)) == render_csv(rows))
