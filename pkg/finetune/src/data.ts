/**
 * Trainset loading and batching.
 *
 * The only input format is the emitted training-set JSONL produced by the
 * corpus tooling: one record per line with
 *   { input: string, target: string, meta: { pair_id: string, context_kind: string } }
 * Records failing that schema abort the load, naming the line.
 */

import * as fs from "node:fs";

import { seededShuffle } from "./rng.js";

export interface TrainRecord {
  input: string;
  target: string;
  pairId: string;
  contextKind: string;
}

export class SchemaError extends Error {}

export function loadTrainset(path: string): TrainRecord[] {
  const lines = fs.readFileSync(path, "utf8").split("\n");
  const records: TrainRecord[] = [];
  lines.forEach((line, index) => {
    if (!line.trim()) return;
    let parsed: unknown;
    try {
      parsed = JSON.parse(line);
    } catch {
      throw new SchemaError(`${path}: line ${index + 1}: not valid JSON`);
    }
    const record = parsed as Record<string, unknown>;
    const meta = record.meta as Record<string, unknown> | undefined;
    if (typeof record.input !== "string" || typeof record.target !== "string") {
      throw new SchemaError(
        `${path}: line ${index + 1}: expected {input, target, meta} trainset schema`,
      );
    }
    if (!meta || typeof meta.pair_id !== "string") {
      throw new SchemaError(`${path}: line ${index + 1}: missing meta.pair_id`);
    }
    records.push({
      input: record.input,
      target: record.target,
      pairId: meta.pair_id,
      contextKind: typeof meta.context_kind === "string" ? meta.context_kind : "unknown",
    });
  });
  if (records.length === 0) {
    throw new SchemaError(`${path}: trainset is empty`);
  }
  return records;
}

/** Seeded holdout split used when no explicit validation set is given. */
export function holdoutSplit(
  records: readonly TrainRecord[],
  fraction: number,
  seed: number,
): { train: TrainRecord[]; val: TrainRecord[] } {
  const shuffled = seededShuffle(records, seed);
  const valCount = Math.max(1, Math.round(records.length * fraction));
  if (valCount >= records.length) {
    throw new SchemaError(`holdout of ${valCount} leaves no training data`);
  }
  return { train: shuffled.slice(valCount), val: shuffled.slice(0, valCount) };
}

export function* batches<T>(items: readonly T[], size: number): Generator<T[]> {
  for (let start = 0; start < items.length; start += size) {
    yield items.slice(start, start + size);
  }
}
