"""
Command Report Module
Machine-readable record of one command: config echo, files written, wall
time and the pass/fail checks it ran.
"""

import json
import sys
import time
from dataclasses import asdict, dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

# Add parent directory to path to import config
sys.path.append(str(Path(__file__).parent.parent))
import config


@dataclass(frozen=True)
class Check:
    """One acceptance check: what was measured, against what, to which tolerance."""
    name: str
    measured: float
    reference: float
    error: float
    tolerance: float
    passed: bool
    stderr: float = None

    @classmethod
    def from_row(cls, row):
        """Check from a comparison row (Comparison.mc_statistics)."""
        return cls(row['name'], row['measured'], row['reference'], row['error'],
                   row['tolerance'], bool(row['passed']), row.get('stderr'))


def _json_number(value):
    if value is None:
        return None
    value = float(value)
    if np.isnan(value):
        return "nan"
    if np.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


class CommandReport:
    """
    Collects outputs and checks while a command runs.
    """

    def __init__(self, command, config_echo):
        """
        Args:
            command (str): Command line name, e.g. 'validate extinction'
            config_echo (dict): Mechanism and run sections as used
        """
        self.command = command
        self.config_echo = config_echo
        self.outputs = []
        self.checks = []
        self.timestamp = datetime.now().isoformat()
        self._start = time.time()
        self.wall_time = None

    def add_output(self, path):
        self.outputs.append(str(path))
        return path

    def add_checks(self, rows, suite=None):
        for row in rows:
            check = Check.from_row(row)
            if suite:
                check = Check(f"[{suite}] {check.name}", check.measured, check.reference,
                              check.error, check.tolerance, check.passed, check.stderr)
            self.checks.append(check)

    @property
    def passed(self):
        return all(check.passed for check in self.checks)

    def finish(self):
        self.wall_time = time.time() - self._start
        return self

    def to_dict(self):
        checks = []
        for check in self.checks:
            entry = asdict(check)
            for key in ('measured', 'reference', 'error', 'tolerance', 'stderr'):
                entry[key] = _json_number(entry[key])
            checks.append(entry)
        return {
            'command': self.command,
            'timestamp': self.timestamp,
            'config': self.config_echo,
            'outputs': list(self.outputs),
            'wall_time': self.wall_time,
            'passed': self.passed,
            'checks': checks,
        }

    def save_json(self, output_dir, filename=config.REPORT_FILENAME):
        """
        Write the report as JSON.

        Returns:
            Path: Written file
        """
        path = Path(output_dir) / filename
        path.parent.mkdir(parents=True, exist_ok=True)
        if self.wall_time is None:
            self.finish()
        with open(path, 'w') as f:
            json.dump(self.to_dict(), f, indent=2)
        print(f"✓ Report saved to {path}")
        return path

    def format_console_output(self):
        lines = ["", "=" * 70, f"LBP {self.command.upper()}", "=" * 70]
        if self.outputs:
            lines.append("")
            lines.append("Outputs:")
            lines.extend(f"  {path}" for path in self.outputs)
        if self.checks:
            failed = [check for check in self.checks if not check.passed]
            lines.append("")
            lines.append(f"Checks: {len(self.checks) - len(failed)}/{len(self.checks)} passed")
            for check in failed:
                lines.append(f"  ✗ {check.name}: {check.measured:.6g} "
                             f"(error {check.error:.3e}, tolerance {check.tolerance:.1e})")
        if self.wall_time is not None:
            lines.append(f"Wall time: {self.wall_time:.1f}s")
        lines.append("=" * 70)
        return "\n".join(lines)
