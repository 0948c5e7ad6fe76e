"""
CSV Writers Module
Comma-separated output with a header row; run metadata goes in trailing
`# key=value` lines.
"""

import csv
from pathlib import Path

import numpy as np


def _open(output_path):
    path = Path(output_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path, open(path, 'w', newline='')


def _footer(f, metadata):
    for key, value in metadata.items():
        f.write(f"# {key}={value}\n")


def write_table_csv(output_path, header, rows, metadata=None):
    """
    Generic table.

    Args:
        output_path (str): Destination
        header (list): Column names
        rows (iterable): Sequences of len(header) values
        metadata (dict): Optional footer lines

    Returns:
        Path: Written file
    """
    path, f = _open(output_path)
    with f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"Row {row} does not match header {header}")
            writer.writerow([_cell(value) for value in row])
        _footer(f, metadata or {})
    return path


def _cell(value):
    if isinstance(value, (bool, np.bool_)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


def write_trajectory_csv(output_path, trajectory):
    """`t,z` records of one path, with absorbed_at, cap_hit, seed and replica in the footer."""
    metadata = {
        'absorbed_at': '' if trajectory.absorbed_at is None else repr(float(trajectory.absorbed_at)),
        'cap_hit': int(trajectory.cap_hit),
        'seed': trajectory.metadata.get('seed', ''),
        'replica': trajectory.metadata.get('replica', ''),
    }
    return write_table_csv(output_path, ['t', 'z'], trajectory.records(), metadata)


def write_extinction_csv(output_path, batch):
    """`replica,T_a,censored` for an ExtinctionBatch."""
    rows = ((r, float(t), bool(censored))
            for r, (t, censored) in enumerate(zip(batch.samples, batch.censored)))
    return write_table_csv(output_path, ['replica', 'T_a', 'censored'], rows,
                           {'seed': batch.seed, 'x0': batch.x0, 't_max': batch.t_max})


def write_riccati_csv(output_path, solution):
    """`s,w,W` on the solution grid, with q, xi and the largest residual in the footer."""
    rows = zip(solution.s.tolist(), solution.w.tolist(), solution.W.tolist())
    metadata = {'q': repr(float(solution.q)), 'xi': repr(float(solution.xi)),
                'max_residual': repr(float(solution.max_residual))}
    return write_table_csv(output_path, ['s', 'w', 'W'], rows, metadata)


def write_jump_log_csv(output_path, path):
    """`t,size` jump log of an OU path."""
    return write_table_csv(output_path, ['t', 'size'], path.jumps,
                           {'t0': '' if path.t0 is None else repr(float(path.t0)),
                            'cap_hit': int(path.cap_hit)})


def read_csv_table(input_path):
    """
    Read back a table written here.

    Returns:
        tuple: (header, rows as lists of strings, metadata dict)
    """
    header, rows, metadata = None, [], {}
    with open(input_path, 'r', newline='') as f:
        for line in f:
            line = line.rstrip('\n')
            if line.startswith('# '):
                key, _, value = line[2:].partition('=')
                metadata[key] = value
            elif header is None:
                header = next(csv.reader([line]))
            elif line:
                rows.append(next(csv.reader([line])))
    return header, rows, metadata
