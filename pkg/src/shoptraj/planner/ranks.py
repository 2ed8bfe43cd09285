"""Stochastic category-rank sampling that fixes the item visit order."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..captions import ItemLists
from ..geometry import dist
from ..storemap import Item, StoreMap
from .params import PlannerParams


@dataclass(frozen=True)
class RankAssignment:
    sampled_rank: dict[str, float]
    visit_order: tuple[Item, ...]


def sample_category_ranks(
    store: StoreMap,
    lists: ItemLists,
    consideration: int,
    params: PlannerParams,
    rng: np.random.Generator,
) -> RankAssignment:
    """Draw one rank per category around its layout prior and order the target items.

    The draw spread grows with purchase consideration, so higher consideration
    yields more shuffled, exploratory visit orders. Items are ordered by their
    category's sampled rank; within a category, by distance from the entrance.
    """
    if not lists.purchase and not lists.interest:
        raise ValueError("item lists are empty")
    targets: list[Item] = []
    for name in list(lists.purchase) + list(lists.interest):
        item = store.items_by_name.get(name.lower())
        if item is None:
            raise ValueError(f"item '{name}' not in the catalog")
        targets.append(item)

    sigma = params.rank_sigma[consideration]
    categories = sorted({it.category for it in targets})
    sampled = {
        c: float(store.category_base_ranks[c] + sigma * rng.standard_normal())
        for c in categories
    }
    ordered = sorted(
        targets,
        key=lambda it: (sampled[it.category], it.category, dist(it.position, store.entrance), it.id),
    )
    return RankAssignment(sampled_rank=sampled, visit_order=tuple(ordered))
