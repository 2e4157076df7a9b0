"""Packaged datasets used by the replication suite."""

from __future__ import annotations

from importlib import resources

from .cli import load_dataset
from .core import TrueDataset

__all__ = ["hawaii_households", "HAWAII_TOTAL_HOUSEHOLDS"]

HAWAII_TOTAL_HOUSEHOLDS = 453_558.0


def hawaii_households() -> TrueDataset:
    """2010 Census household counts for the five Hawaii counties.

    The five values are validated to sum to the published statewide total.
    """
    path = resources.files("dp_postfair.data") / "hawaii_2010_households.csv"
    with resources.as_file(path) as fspath:
        dataset = load_dataset(fspath)
    if dataset.counts.sum() != HAWAII_TOTAL_HOUSEHOLDS:
        raise ValueError("packaged Hawaii fixture does not sum to 453,558")
    return TrueDataset(dataset.entity_ids, dataset.counts,
                       total=HAWAII_TOTAL_HOUSEHOLDS, consistent=True)
