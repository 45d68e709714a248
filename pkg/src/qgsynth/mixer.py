"""Training-set construction: real/synthetic interpolation, size sweeps, emission.

``mix`` is a pure pairwise selector over id-aligned triplet lists: each output
record is exactly its real or its synthetic source, never an edit. Which pairs
flip to synthetic is a seeded permutation prefix, so for a fixed seed the
flipped id set grows monotonically with the fraction and sweep curves differ
only by the flipped prefix. Independent per-fraction sampling is available for
comparison via ``independent=True``.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .common import round_half_up
from .prompts import StylePreset, render_training_input
from .synthesis import Triplet


class MixerError(ValueError):
    pass


def _by_id(triplets: Sequence[Triplet], label: str) -> dict[str, Triplet]:
    table = {t.pair_id: t for t in triplets}
    if len(table) != len(triplets):
        raise MixerError(f"{label} triplets contain duplicate pair_ids")
    return table


def synthetic_prefix_ids(pair_ids: Sequence[str], fraction: float, seed: int) -> set[str]:
    """The seeded permutation prefix of ids that take the synthetic context."""
    k = round_half_up(fraction * len(pair_ids))
    order = sorted(pair_ids)
    random.Random(seed).shuffle(order)
    return set(order[:k])


def mix(
    real: Sequence[Triplet],
    synthetic: Sequence[Triplet],
    fraction: float,
    seed: int,
    independent: bool = False,
) -> list[Triplet]:
    """Interpolate between real and synthetic contexts at ``fraction``.

    Exactly round(fraction * n) pairs take their synthetic triplet, the rest
    their real one; output follows the real list's order. Both lists must
    cover the same pair_id set.
    """
    if not 0 <= fraction <= 1:
        raise MixerError(f"fraction must be in [0, 1], got {fraction}")
    real_by_id = _by_id(real, "real")
    synth_by_id = _by_id(synthetic, "synthetic")
    if real_by_id.keys() != synth_by_id.keys():
        only_real = sorted(real_by_id.keys() - synth_by_id.keys())[:5]
        only_synth = sorted(synth_by_id.keys() - real_by_id.keys())[:5]
        raise MixerError(
            f"pair_id mismatch between real and synthetic triplets: "
            f"only in real {only_real}, only in synthetic {only_synth}"
        )
    ids = [t.pair_id for t in real]
    if independent:
        k = round_half_up(fraction * len(ids))
        flipped = set(random.Random(seed).sample(sorted(ids), k))
    else:
        flipped = synthetic_prefix_ids(ids, fraction, seed)
    return [synth_by_id[pid] if pid in flipped else real_by_id[pid] for pid in ids]


def sweep_sizes(
    triplets: Sequence[Triplet], sizes: Sequence[int], seed: int
) -> dict[int, list[Triplet]]:
    """Nested seeded subsets, one per requested size (size is the only factor).

    dataset(s1) ⊆ dataset(s2) whenever s1 <= s2 for the same seed; each subset
    preserves the input's relative order.
    """
    if any(s <= 0 for s in sizes):
        raise MixerError("sizes must be positive")
    if max(sizes) > len(triplets):
        raise MixerError(f"size {max(sizes)} exceeds {len(triplets)} available triplets")
    order = list(range(len(triplets)))
    random.Random(seed).shuffle(order)
    out: dict[int, list[Triplet]] = {}
    for size in sizes:
        chosen = sorted(order[:size])
        out[size] = [triplets[i] for i in chosen]
    return out


@dataclass(frozen=True)
class EmitReport:
    count: int
    truncated_count: int


def emit_trainset(
    triplets: Sequence[Triplet],
    style: StylePreset,
    path: str | Path,
    max_input_tokens: int = 512,
) -> EmitReport:
    """Write training-ready JSONL: {input, target, meta:{pair_id, context_kind}}.

    Inputs longer than ``max_input_tokens`` whitespace words are truncated at
    a word boundary and counted in the report.
    """
    if max_input_tokens <= 0:
        raise MixerError("max_input_tokens must be positive")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    truncated = 0
    with open(path, "w", encoding="utf-8") as fh:
        for triplet in triplets:
            input_text, target_text = render_training_input(triplet, style)
            words = input_text.split()
            if len(words) > max_input_tokens:
                input_text = " ".join(words[:max_input_tokens])
                truncated += 1
            record = {
                "input": input_text,
                "target": target_text,
                "meta": {"pair_id": triplet.pair_id, "context_kind": triplet.context_kind},
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    return EmitReport(count=len(triplets), truncated_count=truncated)
