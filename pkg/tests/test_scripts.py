import csv
import runpy
import sys
from pathlib import Path

import numpy as np

SCRIPTS = Path(__file__).resolve().parents[1] / "scripts"


def test_figure_data_export(tmp_path, monkeypatch):
    argv = ["export_figure_data.py", "--out", str(tmp_path), "--n-steps", "20", "--n-x", "300", "--x-points", "4"]
    monkeypatch.setattr(sys, "argv", argv)
    runpy.run_path(str(SCRIPTS / "export_figure_data.py"), run_name="__main__")
    with open(tmp_path / "prices_vs_x.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x", "european", "bermudan", "american"]
    e, b, a = np.array(rows[1:], dtype=float)[:, 1:].T
    assert np.all(e <= b + 1e-12) and np.all(b <= a + 2e-4)
    for name in ("zero_curves", "boundary_payer", "boundary_receiver", "swaprate_boundaries"):
        assert (tmp_path / f"{name}.csv").stat().st_size > 0
