"""Caption synthesis pipeline: contextual captions, category action plans, item lists.

Step 1 generates caption profiles in batches, step 2 allocates purchase
quantities to store categories, step 3 expands each allocated category into
concrete purchase and interest item lists resolved against the catalog.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from importlib import resources
from typing import Mapping, Sequence

from .gateway import (
    Gateway,
    PromptRequest,
    SchemaDescriptor,
    StructuredOutputError,
    complete_structured,
    retry_request,
)
from .storemap import StoreMap

log = logging.getLogger(__name__)

STEP1_BATCH_SIZE = 10
STEP1_TEMPERATURE = 1.0  # diversity
STEP23_TEMPERATURE = 0.2  # structure fidelity
PLAN_TOLERANCE_FRACTION = 0.3
INTEREST_SOFT_CEILING_FACTOR = 2

STEP1_SCHEMA = SchemaDescriptor.list_of(
    SchemaDescriptor.record(
        intention="string",
        num_items_to_buy="integer",
        purchase_consideration="integer",
    )
)
STEP2_SCHEMA = SchemaDescriptor.mapping("integer")
STEP3_SCHEMA = SchemaDescriptor.record(
    inclined_to_purchase="list[string]",
    show_interest="list[string]",
)


class PipelineError(Exception):
    """A synthesis step failed for one sample."""


@dataclass(frozen=True)
class CaptionProfile:
    """A contextual caption with its planned quantity and consideration score."""

    caption: str
    num_items_to_buy: int
    purchase_consideration: int

    def __post_init__(self) -> None:
        if not self.caption:
            raise ValueError("caption must be non-empty")
        if self.num_items_to_buy <= 0:
            raise ValueError("num_items_to_buy must be positive")
        if not 1 <= self.purchase_consideration <= 5:
            raise ValueError("purchase_consideration must be in [1, 5]")


@dataclass(frozen=True)
class ActionPlan:
    """Category to purchase-quantity allocation."""

    allocation: Mapping[str, int]

    @property
    def total(self) -> int:
        return sum(self.allocation.values())


@dataclass(frozen=True)
class ItemLists:
    """Resolved purchase and interest item names; always disjoint."""

    purchase: tuple[str, ...]
    interest: tuple[str, ...]


@dataclass(frozen=True)
class PlanCheck:
    ok: bool
    total: int
    target: int
    tolerance: int
    message: str = ""


def _load_template(name: str) -> tuple[str, str]:
    text = resources.files("shoptraj.data.prompts").joinpath(f"{name}.txt").read_text("utf-8")
    system, _, user = text.partition("\n---\n")
    return system.strip(), user.strip()


def build_step1_request(batch_size: int, batch_index: int, seed: int | None = None) -> PromptRequest:
    system, user = _load_template("step1")
    return PromptRequest(
        system=system,
        user=user.format(samples=batch_size, format_instructions=STEP1_SCHEMA.format_instructions()),
        temperature=STEP1_TEMPERATURE,
        max_tokens=4096,
        tag=f"step1.{batch_index:02d}",
        seed=seed,
    )


def build_step2_request(profile: CaptionProfile, categories: Sequence[str], seed: int | None = None) -> PromptRequest:
    system, user = _load_template("step2")
    return PromptRequest(
        system=system,
        user=user.format(
            num_items=profile.num_items_to_buy,
            intention=profile.caption,
            category_list=", ".join(categories),
            format_instructions=STEP2_SCHEMA.format_instructions(),
        ),
        temperature=STEP23_TEMPERATURE,
        max_tokens=1024,
        tag="step2",
        seed=seed,
    )


def item_description_lines(store: StoreMap, category: str) -> str:
    lines = []
    for it in store.items:
        if it.category != category:
            continue
        attrs = ", ".join(f"{k}={v}" for k, v in sorted(it.attributes.items()))
        lines.append(f"{it.name} ({it.category}): {attrs}" if attrs else f"{it.name} ({it.category})")
    return "\n".join(lines)


def build_step3_request(
    profile: CaptionProfile,
    category: str,
    num_purchase_items: int,
    store: StoreMap,
    seed: int | None = None,
) -> PromptRequest:
    system, user = _load_template("step3")
    return PromptRequest(
        system=system,
        user=user.format(
            category=category,
            num_purchase_items=num_purchase_items,
            purchase_consideration=profile.purchase_consideration,
            intention=profile.caption,
            item_description=item_description_lines(store, category),
            format_instructions=STEP3_SCHEMA.format_instructions(),
        ),
        temperature=STEP23_TEMPERATURE,
        max_tokens=1024,
        tag="step3",
        seed=seed,
    )


def _profile_from_fields(fields: Mapping[str, object]) -> CaptionProfile:
    try:
        return CaptionProfile(
            caption=str(fields["intention"]).strip(),
            num_items_to_buy=int(fields["num_items_to_buy"]),  # type: ignore[arg-type]
            purchase_consideration=int(fields["purchase_consideration"]),  # type: ignore[arg-type]
        )
    except ValueError as exc:
        raise StructuredOutputError(str(exc), field="intention") from None


def generate_captions(gw: Gateway, store: StoreMap, n: int, rng_seed: int = 0) -> list[CaptionProfile]:
    """Step 1: n caption profiles, requested in batches of STEP1_BATCH_SIZE.

    `rng_seed` is forwarded to live backends as a sampling seed; the mock
    backend replays fixtures and ignores it.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    del store  # profiles are store-independent; the map binds in steps 2-3
    profiles: list[CaptionProfile] = []
    batch_index = 0
    while len(profiles) < n:
        size = min(STEP1_BATCH_SIZE, n - len(profiles))
        req = build_step1_request(size, batch_index, seed=rng_seed + batch_index)
        rows = complete_structured(gw, req, STEP1_SCHEMA)
        try:
            batch = [_profile_from_fields(row) for row in rows]
        except StructuredOutputError as exc:
            log.warning("[%s] invalid profile (%s); re-prompting once", req.tag, exc)
            rows = complete_structured(gw, retry_request(req, exc), STEP1_SCHEMA)
            batch = [_profile_from_fields(row) for row in rows]
        if len(batch) < size:
            raise PipelineError(f"step 1 batch {batch_index} returned {len(batch)} < {size} profiles")
        profiles.extend(batch[:size])
        batch_index += 1
    return profiles


def validate_plan(plan: ActionPlan, profile: CaptionProfile) -> PlanCheck:
    """Total allocation must stay within +-30% (ceil) of the planned quantity."""
    target = profile.num_items_to_buy
    tolerance = math.ceil(PLAN_TOLERANCE_FRACTION * target)
    total = plan.total
    ok = abs(total - target) <= tolerance
    message = "" if ok else (
        f"allocation total {total} deviates from target {target} by more than {tolerance}"
    )
    return PlanCheck(ok=ok, total=total, target=target, tolerance=tolerance, message=message)


def _plan_from_mapping(raw: Mapping[str, int], categories: Sequence[str]) -> ActionPlan:
    unknown = sorted(set(raw) - set(categories))
    if unknown:
        raise PipelineError(f"plan names categories absent from the store: {unknown}")
    negative = sorted(k for k, v in raw.items() if v < 0)
    if negative:
        raise PipelineError(f"plan has negative quantities for: {negative}")
    if not any(v > 0 for v in raw.values()):
        raise PipelineError("plan has no positive allocation")
    return ActionPlan(allocation=dict(raw))


def generate_action_plan(
    gw: Gateway, profile: CaptionProfile, categories: Sequence[str], seed: int | None = None
) -> ActionPlan:
    """Step 2: allocate the planned quantity across store categories."""
    req = build_step2_request(profile, categories, seed=seed)
    raw = complete_structured(gw, req, STEP2_SCHEMA)
    plan = _plan_from_mapping(raw, categories)
    check = validate_plan(plan, profile)
    if check.ok:
        return plan
    log.warning("[step2] %s; re-prompting once", check.message)
    raw = complete_structured(gw, retry_request(req, check.message), STEP2_SCHEMA)
    plan = _plan_from_mapping(raw, categories)
    check = validate_plan(plan, profile)
    if not check.ok:
        raise PipelineError(f"step 2 failed after re-prompt: {check.message}")
    return plan


def _resolve_names(
    names: Sequence[str], category: str, store: StoreMap, list_name: str
) -> list[str]:
    """Map raw reply names onto catalog names; unresolvable names are dropped."""
    resolved: list[str] = []
    for name in names:
        item = store.items_by_name.get(name.strip().lower())
        if item is None:
            log.warning("[step3] dropping unknown %s item '%s'", list_name, name)
            continue
        if item.category != category:
            log.warning(
                "[step3] dropping %s item '%s': belongs to '%s', not '%s'",
                list_name, name, item.category, category,
            )
            continue
        if item.name not in resolved:
            resolved.append(item.name)
    return resolved


def generate_item_lists(
    gw: Gateway,
    profile: CaptionProfile,
    plan: ActionPlan,
    store: StoreMap,
    seed: int | None = None,
) -> ItemLists:
    """Step 3: one call per positively allocated category, merged and resolved."""
    purchase: list[str] = []
    interest: list[str] = []
    for category in store.categories:
        qty = plan.allocation.get(category, 0)
        if qty <= 0:
            continue
        req = build_step3_request(profile, category, qty, store, seed=seed)
        reply = complete_structured(gw, req, STEP3_SCHEMA)
        bought = _resolve_names(reply["inclined_to_purchase"], category, store, "purchase")
        if abs(len(bought) - qty) > 1:
            msg = f"purchase list for '{category}' has {len(bought)} items, allocation is {qty}"
            log.warning("[step3] %s; re-prompting once", msg)
            reply = complete_structured(gw, retry_request(req, msg), STEP3_SCHEMA)
            bought = _resolve_names(reply["inclined_to_purchase"], category, store, "purchase")
            if abs(len(bought) - qty) > 1:
                raise PipelineError(f"step 3 failed after re-prompt: {msg}")
        looked = _resolve_names(reply["show_interest"], category, store, "interest")
        looked = [n for n in looked if n not in bought and n not in purchase]
        ceiling = INTEREST_SOFT_CEILING_FACTOR * qty
        if len(looked) > ceiling:
            log.warning(
                "[step3] interest list for '%s' has %d items, above the soft ceiling %d",
                category, len(looked), ceiling,
            )
        purchase.extend(n for n in bought if n not in purchase)
        interest.extend(n for n in looked if n not in interest)
    interest = [n for n in interest if n not in purchase]
    if not purchase:
        raise PipelineError("merged purchase list is empty")
    return ItemLists(purchase=tuple(purchase), interest=tuple(interest))
