"""
Replica Runner Module
Runs a per-replica kernel over independent random substreams, sequentially
or on a process pool, with results in replica order.
"""

import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

# Add parent directory to path to import config
sys.path.append(str(Path(__file__).parent.parent))
import config
from Numerics.streams import replica_stream


def _run_one(job):
    kernel, seed, labels, replica, args = job
    return kernel(replica_stream(seed, replica, *labels), *args)


def run_replicas(kernel, n_replicas, seed, labels=(), args=(), workers=config.DEFAULT_WORKERS,
                 verbose=False):
    """
    Evaluate kernel(stream, *args) for replicas 0..n-1.

    Replica r always receives the stream derived from (seed, labels, r), so
    the result list is the same for any number of workers.

    Args:
        kernel (callable): Module-level function (picklable) taking a RandomStream
        n_replicas (int): Number of replicas
        seed (int): Root seed
        labels (tuple): Integer labels separating sub-experiments of one run
        args (tuple): Extra positional arguments passed to the kernel
        workers (int): Number of processes (1 runs in this process)
        verbose (bool): Print progress

    Returns:
        list: Kernel results ordered by replica index
    """
    jobs = [(kernel, seed, tuple(labels), r, tuple(args)) for r in range(n_replicas)]
    start = time.time()

    if workers <= 1 or n_replicas < 2:
        results = []
        report_every = max(n_replicas // 10, 1)
        for i, job in enumerate(jobs, 1):
            results.append(_run_one(job))
            if verbose and (i % report_every == 0 or i == n_replicas):
                print(f"  {i}/{n_replicas} replicas ({time.time() - start:.1f}s)")
        return results

    chunksize = max(n_replicas // (8 * workers), 1)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(_run_one, jobs, chunksize=chunksize))
    if verbose:
        print(f"  {n_replicas} replicas on {workers} workers ({time.time() - start:.1f}s)")
    return results
