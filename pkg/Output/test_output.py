"""
Output Self-Tests
Run directly (python Output/test_output.py) or through pytest.
"""

import json
import sys
import tempfile
from pathlib import Path
from types import SimpleNamespace

import numpy as np

# Add parent directory to path to import config
sys.path.append(str(Path(__file__).parent.parent))
from Comparison.mc_statistics import compare
from Output.plots import plot_histogram, plot_pmf_comparison, plot_riccati, plot_trajectories
from Output.report import Check, CommandReport
from Output.writers import (read_csv_table, write_extinction_csv, write_jump_log_csv,
                            write_riccati_csv, write_table_csv, write_trajectory_csv)
from Simulation.trajectory import ExtinctionBatch, Trajectory


def _trajectory():
    return Trajectory(np.array([0.0, 0.5, 1.25]), np.array([2, 1, 0]), absorbed_at=1.25,
                      metadata={'seed': 9, 'replica': 4})


def test_trajectory_csv_footer():
    with tempfile.TemporaryDirectory() as tmp:
        path = write_trajectory_csv(Path(tmp) / "paths" / "traj.csv", _trajectory())
        header, rows, metadata = read_csv_table(path)
        assert header == ['t', 'z']
        assert rows == [['0.0', '2'], ['0.5', '1'], ['1.25', '0']]
        assert metadata == {'absorbed_at': '1.25', 'cap_hit': '0', 'seed': '9', 'replica': '4'}


def test_extinction_csv():
    batch = ExtinctionBatch([1.5, 3.0], [False, True], seed=1, x0=10, t_max=3.0)
    with tempfile.TemporaryDirectory() as tmp:
        header, rows, metadata = read_csv_table(write_extinction_csv(Path(tmp) / "t.csv", batch))
        assert header == ['replica', 'T_a', 'censored']
        assert rows == [['0', '1.5', '0'], ['1', '3.0', '1']]
        assert metadata['x0'] == '10'


def test_riccati_csv_metadata():
    solution = SimpleNamespace(s=np.array([0.1, 0.2]), w=np.array([2.0, 0.0]),
                               W=np.array([0.1, 0.25]), q=1.0, xi=np.inf, max_residual=3e-8)
    with tempfile.TemporaryDirectory() as tmp:
        header, rows, metadata = read_csv_table(write_riccati_csv(Path(tmp) / "w.csv", solution))
        assert header == ['s', 'w', 'W'] and len(rows) == 2
        assert metadata == {'q': '1.0', 'xi': 'inf', 'max_residual': '3e-08'}


def test_jump_log_and_table():
    path = SimpleNamespace(jumps=[(0.25, 1.0), (0.75, 0.5)], t0=None, cap_hit=False)
    with tempfile.TemporaryDirectory() as tmp:
        header, rows, _ = read_csv_table(write_jump_log_csv(Path(tmp) / "j.csv", path))
        assert header == ['t', 'size'] and rows[1] == ['0.75', '0.5']
        try:
            write_table_csv(Path(tmp) / "bad.csv", ['a', 'b'], [(1,)])
        except ValueError:
            pass
        else:
            raise AssertionError("short row accepted")


def test_command_report_json():
    report = CommandReport('validate demo', {'run': {'seed': 1}})
    report.add_checks([compare("good", 1.0, 1.0, 0.1),
                       compare("bad", np.nan, 1.0, 0.1)], suite='demo')
    assert not report.passed
    assert report.checks[0] == Check("[demo] good", 1.0, 1.0, 0.0, 0.1, True, None)
    with tempfile.TemporaryDirectory() as tmp:
        report.add_output(Path(tmp) / "x.csv")
        path = report.save_json(tmp)
        saved = json.loads(path.read_text())
        assert saved['command'] == 'validate demo'
        assert saved['passed'] is False
        assert saved['checks'][1]['measured'] == "nan"
        assert saved['wall_time'] >= 0.0
    assert "1/2 passed" in report.format_console_output()


def test_plots_write_svg():
    with tempfile.TemporaryDirectory() as tmp:
        written = [
            plot_trajectories([_trajectory()], Path(tmp) / "paths"),
            plot_pmf_comparison([0.5, 0.5], [0.4, 0.4, 0.2], Path(tmp) / "pmf"),
            plot_histogram(np.linspace(0.0, 1.0, 50), Path(tmp) / "hist", reference=0.5),
            plot_riccati(SimpleNamespace(s=np.array([0.1, 0.5, 1.0]),
                                         w=np.array([3.0, 1.0, 0.0]),
                                         W=np.array([0.2, 1.0, 1.3]),
                                         z=np.array([-1.0, 0.0, 1.0]), q=1.0,
                                         functionals=SimpleNamespace(r_z=np.exp)),
                         Path(tmp) / "riccati"),
        ]
        for path in written:
            assert path.suffix == '.svg'
            assert '<svg' in path.read_text()


if __name__ == "__main__":
    print("Testing Output")
    print("=" * 60)
    for name, test in list(globals().items()):
        if name.startswith("test_") and callable(test):
            test()
            print(f"✓ {name}")
