/**
 * Greedy question generation over a test set in the emitted trainset schema,
 * writing the predictions JSONL ({pair_id, text}) that the corpus tooling's
 * `score` command consumes, plus a small decoding manifest beside it.
 *
 * Decoding is batched: each step runs one forward pass over all still-open
 * sequences, so a test set decodes in maxTargetLen passes rather than
 * records × maxTargetLen.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import * as tf from "@tensorflow/tfjs";

import { TrainRecord, batches, loadTrainset } from "./data.js";
import { Artifacts, loadArtifacts } from "./model.js";
import { BOS, EOS, PAD, padLeft, padRight } from "./tokenizer.js";

const DECODE_BATCH = 64;

export interface GenerateOptions {
  /** Warn when test inputs were not rendered from real contexts (the
   * evaluation protocol tests on real context when available). */
  useRealContext?: boolean;
}

export interface Prediction {
  pair_id: string;
  text: string;
}

export function greedyDecodeBatch(artifacts: Artifacts, inputs: readonly string[]): string[] {
  const { model, tokenizer, config } = artifacts;
  if (inputs.length === 0) {
    return [];
  }
  const encoder = tf.tensor2d(
    inputs.map((text) => padLeft(tokenizer.encode(text), config.maxInputLen)),
    undefined,
    "int32",
  );
  const decoded: number[][] = inputs.map(() => []);
  const open = inputs.map(() => true);
  try {
    for (let step = 0; step < config.maxTargetLen - 1; step++) {
      if (!open.some(Boolean)) {
        break;
      }
      const next = tf.tidy(() => {
        const decoder = tf.tensor2d(
          decoded.map((ids) => padRight([BOS, ...ids], config.maxTargetLen)),
          undefined,
          "int32",
        );
        const logits = model.predict([encoder, decoder]) as tf.Tensor3D;
        const stepLogits = logits
          .slice([0, step, 0], [inputs.length, 1, -1])
          .squeeze([1]) as tf.Tensor2D;
        return stepLogits.argMax(-1).dataSync();
      });
      for (let row = 0; row < inputs.length; row++) {
        if (!open[row]) continue;
        const token = next[row];
        if (token === EOS || token === PAD) {
          open[row] = false;
        } else {
          decoded[row].push(token);
        }
      }
    }
  } finally {
    encoder.dispose();
  }
  return decoded.map((ids) => tokenizer.decode(ids));
}

export function greedyDecode(artifacts: Artifacts, inputText: string): string {
  return greedyDecodeBatch(artifacts, [inputText])[0];
}

export async function generate(
  testsetPath: string,
  modelDir: string,
  outPath: string,
  options: GenerateOptions = {},
): Promise<Prediction[]> {
  const artifacts = await loadArtifacts(modelDir);
  const records: TrainRecord[] = loadTrainset(testsetPath);

  if (options.useRealContext ?? true) {
    const synthetic = records.filter((r) => r.contextKind !== "real").length;
    if (synthetic > 0) {
      console.warn(
        `warning: ${synthetic}/${records.length} test inputs were not rendered from ` +
          `real contexts; the evaluation protocol tests on real context when available`,
      );
    }
  }

  const predictions: Prediction[] = [];
  for (const group of batches(records, DECODE_BATCH)) {
    const texts = greedyDecodeBatch(artifacts, group.map((r) => r.input));
    group.forEach((record, i) => predictions.push({ pair_id: record.pairId, text: texts[i] }));
  }

  fs.mkdirSync(path.dirname(path.resolve(outPath)), { recursive: true });
  fs.writeFileSync(outPath, predictions.map((p) => JSON.stringify(p)).join("\n") + "\n");
  fs.writeFileSync(
    outPath + ".manifest.json",
    JSON.stringify(
      {
        decoding: "greedy",
        model_dir: path.resolve(modelDir),
        config_hash: artifacts.configHash,
        test_records: records.length,
        max_target_len: artifacts.config.maxTargetLen,
      },
      null,
      2,
    ),
  );
  return predictions;
}
