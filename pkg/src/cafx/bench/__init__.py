"""Benchmark workloads, numeric kernels, and the measuring harness."""
from .harness import BenchReport, MemorySampler, measure, repeat, summarize, write_csv
from .kernels import counts_checksum, factorize, mandelbrot_oracle, mandelbrot_row
from .workloads import (DEFAULT_FACTOR_TARGET, run_creation, run_mailbox, run_mandelbrot,
                        run_mixed)

__all__ = [
    "BenchReport", "MemorySampler", "measure", "repeat", "summarize", "write_csv",
    "counts_checksum", "factorize", "mandelbrot_oracle", "mandelbrot_row",
    "DEFAULT_FACTOR_TARGET", "run_creation", "run_mailbox", "run_mandelbrot", "run_mixed",
]
