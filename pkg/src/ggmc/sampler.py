"""
Seeded multivariate normal sampling and sample-matrix CSV I/O.

Random streams: every generator is a counter-based Philox stream keyed by
(seed, stream). The sample, graph and bootstrap streams of one seed use
different stream ids and never overlap; replication r of a simulation with
root seed s uses seed s + r, and bootstrap resample b uses seed + b on the
bootstrap stream. Standard normals are produced by the inverse CDF (ndtri)
of uniforms drawn from the open interval (0, 1).
"""

import logging
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from scipy.special import ndtri

from .errors import MalformedInput
from .linalg import cholesky
from .models import GraphModel, SampleMatrix

logger = logging.getLogger(__name__)

STREAM_SAMPLE = 0
STREAM_GRAPH = 1
STREAM_BOOTSTRAP = 2
STREAM_ORACLE = 3

_SEED_MASK = (1 << 64) - 1
_MANTISSA = 2.0 ** 53


def rng_for(seed: int, stream: int = STREAM_SAMPLE) -> np.random.Generator:
    """
    Counter-based generator for one (seed, stream) pair.

    Args:
        seed: Non-negative 64-bit seed
        stream: Stream id (STREAM_SAMPLE, STREAM_GRAPH, ...)

    Returns:
        np.random.Generator: Philox generator keyed by seed + (stream << 64)
    """
    if seed < 0:
        raise ValueError("seeds must be non-negative")
    key = (seed & _SEED_MASK) | (stream << 64)
    return np.random.Generator(np.random.Philox(key=key))


def open_uniform(rng: np.random.Generator, size) -> np.ndarray:
    """Uniforms on the open interval (0, 1) with 53-bit resolution."""
    draws = rng.integers(0, 2**53, size=size, dtype=np.int64)
    return (draws + 0.5) / _MANTISSA


def standard_normal(rng: np.random.Generator, size) -> np.ndarray:
    """Standard normals by the inverse-CDF transform."""
    return ndtri(open_uniform(rng, size))


def sample_mvn(model: GraphModel, n: int, seed: int) -> SampleMatrix:
    """
    Draw n i.i.d. rows from N(0, Sigma) as z L^T with L = cholesky(Sigma).

    Args:
        model: Graph model supplying Sigma
        n: Number of observations (>= 2)
        seed: Sample seed

    Returns:
        SampleMatrix: Bit-identical for identical (model, n, seed)
    """
    if n < 2:
        raise ValueError("need at least two observations")
    factor = cholesky(model.sigma)
    z = standard_normal(rng_for(seed, STREAM_SAMPLE), (n, model.k))
    tag = model.design_tag.value if model.design_tag else None
    return SampleMatrix(values=z @ factor.lower.T, seed=seed, model_tag=tag)


def center(X: SampleMatrix) -> Tuple[SampleMatrix, np.ndarray]:
    """
    Subtract column means.

    Constant columns center to exact zeros, so later variance checks see them
    as degenerate even when the floating-point mean is off by an ulp.

    Returns:
        Tuple of the centered sample and the column means
    """
    means = X.values.mean(axis=0)
    centered = X.values - means
    centered[:, np.ptp(X.values, axis=0) == 0.0] = 0.0
    return SampleMatrix(values=centered, seed=X.seed, model_tag=X.model_tag), means


def read_samples_csv(path: str, header: bool = False) -> SampleMatrix:
    """
    Read an n x k numeric matrix from a comma-separated file.

    Args:
        path: CSV file, one observation per row
        header: Whether the first row holds column names

    Returns:
        SampleMatrix

    Raises:
        MalformedInput: With the offending line (1-based, as in the file) and column
    """
    try:
        frame = pd.read_csv(
            path,
            header=0 if header else None,
            dtype=str,
            skip_blank_lines=False,
            keep_default_na=False,
        )
    except FileNotFoundError as e:
        raise MalformedInput(f"file not found: {path}") from e
    except pd.errors.EmptyDataError as e:
        raise MalformedInput("file is empty") from e
    except pd.errors.ParserError as e:
        raise MalformedInput(f"inconsistent number of fields: {e}") from e

    first_data_line = 2 if header else 1
    # blank lines are dropped here so the index keeps each row's line in the file
    text = frame.fillna("").apply(lambda col: col.str.strip())
    frame = frame[(text != "").any(axis=1)]
    if frame.empty:
        raise MalformedInput("file holds no data rows")
    numeric = frame.apply(lambda col: pd.to_numeric(col.str.strip(), errors="coerce"))
    bad = numeric.isna() | ~np.isfinite(numeric.to_numpy(dtype=float, na_value=np.nan))
    if bad.to_numpy().any():
        row, col = np.argwhere(bad.to_numpy())[0]
        column = str(frame.columns[col]) if header else str(col + 1)
        raise MalformedInput(
            f"non-numeric value {frame.iat[row, col]!r}",
            line=int(frame.index[row]) + first_data_line,
            column=column,
        )

    values = numeric.to_numpy(dtype=float)
    if values.ndim != 2 or values.shape[0] < 2 or values.shape[1] < 2:
        raise MalformedInput(f"need at least 2 rows and 2 columns, got shape {values.shape}")
    logger.debug("Read %d x %d sample matrix from %s", values.shape[0], values.shape[1], path)
    return SampleMatrix(values=values)


def write_samples_csv(X: SampleMatrix, path: str, header: Optional[list] = None) -> None:
    """
    Write a sample matrix as CSV ('.' decimal, full precision).

    Args:
        X: Samples to write
        path: Destination file
        header: Optional column names; None writes no header row
    """
    frame = pd.DataFrame(X.values, columns=header)
    frame.to_csv(path, header=header is not None, index=False, float_format="%.17g")


def read_pvalues_csv(path: str, header: bool = False, column: Optional[str] = None) -> np.ndarray:
    """
    Read p-values from a CSV file: a single column, the named column, or the
    "p" column of a pvalues.csv written by the estimate command.

    Raises:
        MalformedInput: If a value is non-numeric or outside [0, 1]
    """
    try:
        frame = pd.read_csv(path, header=0 if header else None, dtype=str, keep_default_na=False)
    except FileNotFoundError as e:
        raise MalformedInput(f"file not found: {path}") from e
    except pd.errors.EmptyDataError as e:
        raise MalformedInput("file is empty") from e
    except pd.errors.ParserError as e:
        raise MalformedInput(f"inconsistent number of fields: {e}") from e

    if column is None and header and "p" in frame.columns:
        column = "p"
    if column is not None:
        if column not in frame.columns:
            raise MalformedInput(f"no column named {column!r}")
        series = frame[column]
    elif frame.shape[1] == 1:
        series = frame.iloc[:, 0]
    else:
        raise MalformedInput("expected a single column of p-values or a header with a 'p' column")

    values = pd.to_numeric(series.str.strip(), errors="coerce").to_numpy(dtype=float)
    bad = np.nonzero(~np.isfinite(values) | (values < 0.0) | (values > 1.0))[0]
    if bad.size:
        row = int(bad[0])
        raise MalformedInput(
            f"{series.iloc[row]!r} is not a p-value in [0, 1]",
            line=row + (2 if header else 1),
            column=str(series.name) if header else "1",
        )
    if values.size == 0:
        raise MalformedInput("no p-values found")
    return values
