/**
 * Training loop: negative log-likelihood of the gold question given the
 * rendered (context, answer) input, with padding masked out of the loss.
 *
 * Early stopping watches validation loss and halts once it has failed to
 * improve over the configured number of most recent epochs (default 3).
 * Per-epoch losses stream to training_log.jsonl inside the artifact dir.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import * as tf from "@tensorflow/tfjs";

import { TrainRecord, batches, holdoutSplit, loadTrainset } from "./data.js";
import { ModelConfig, buildModel, saveArtifacts } from "./model.js";
import { seededShuffle } from "./rng.js";
import { BOS, EOS, PAD, Tokenizer, padLeft, padRight } from "./tokenizer.js";

export interface EpochLog {
  epoch: number;
  train_loss: number;
  val_loss: number;
}

export interface TrainResult {
  modelDir: string;
  log: EpochLog[];
  stoppedEarly: boolean;
  bestEpoch: number;
}

export interface EncodedBatch {
  encoder: tf.Tensor2D;
  decoder: tf.Tensor2D;
  targets: tf.Tensor2D;
}

export function encodeBatch(
  records: readonly TrainRecord[],
  tokenizer: Tokenizer,
  config: ModelConfig,
): EncodedBatch {
  const encoderRows: number[][] = [];
  const decoderRows: number[][] = [];
  const targetRows: number[][] = [];
  for (const record of records) {
    const inputIds = tokenizer.encode(record.input);
    const targetIds = tokenizer.encode(record.target).slice(0, config.maxTargetLen - 1);
    encoderRows.push(padLeft(inputIds, config.maxInputLen));
    decoderRows.push(padRight([BOS, ...targetIds], config.maxTargetLen));
    targetRows.push(padRight([...targetIds, EOS], config.maxTargetLen));
  }
  return {
    encoder: tf.tensor2d(encoderRows, undefined, "int32"),
    decoder: tf.tensor2d(decoderRows, undefined, "int32"),
    targets: tf.tensor2d(targetRows, undefined, "int32"),
  };
}

/** Mean token NLL over non-pad target positions. */
export function maskedLoss(logits: tf.Tensor3D, targets: tf.Tensor2D): tf.Scalar {
  return tf.tidy(() => {
    const vocabSize = logits.shape[2];
    const oneHot = tf.oneHot(targets, vocabSize);
    const perToken = tf.losses.softmaxCrossEntropy(
      oneHot,
      logits,
      undefined,
      undefined,
      tf.Reduction.NONE,
    ) as tf.Tensor2D;
    const mask = tf.notEqual(targets, PAD).cast("float32");
    const tokenCount = mask.sum();
    return perToken.mul(mask).sum().div(tokenCount) as tf.Scalar;
  });
}

function meanLoss(
  model: tf.LayersModel,
  groups: readonly TrainRecord[][],
  tokenizer: Tokenizer,
  config: ModelConfig,
): number {
  let lossSum = 0;
  let tokenSum = 0;
  for (const group of groups) {
    const batch = encodeBatch(group, tokenizer, config);
    const value = tf.tidy(() => {
      const logits = model.predict([batch.encoder, batch.decoder]) as tf.Tensor3D;
      const loss = maskedLoss(logits, batch.targets);
      const tokens = tf.notEqual(batch.targets, PAD).sum().dataSync()[0];
      return [loss.dataSync()[0], tokens] as const;
    });
    lossSum += value[0] * value[1];
    tokenSum += value[1];
    tf.dispose([batch.encoder, batch.decoder, batch.targets]);
  }
  return lossSum / tokenSum;
}

export interface TrainHooks {
  /** Override validation scoring (used by tests to fake stagnant losses). */
  evaluate?: (epoch: number) => number;
  onEpoch?: (log: EpochLog) => void;
}

export async function train(
  trainsetPath: string,
  valsetPath: string | null,
  modelDir: string,
  config: ModelConfig,
  hooks: TrainHooks = {},
): Promise<TrainResult> {
  const records = loadTrainset(trainsetPath);
  let trainRecords: TrainRecord[];
  let valRecords: TrainRecord[];
  if (valsetPath) {
    trainRecords = records;
    valRecords = loadTrainset(valsetPath);
  } else {
    ({ train: trainRecords, val: valRecords } = holdoutSplit(
      records,
      config.holdoutFraction,
      config.seed,
    ));
  }

  const tokenizer = Tokenizer.build(
    records.flatMap((r) => [r.input, r.target]),
    config.vocabCap,
  );
  const model = buildModel(config, tokenizer.size);
  const optimizer = tf.train.adam(config.learningRate);

  fs.mkdirSync(modelDir, { recursive: true });
  const logPath = path.join(modelDir, "training_log.jsonl");
  fs.writeFileSync(logPath, "");

  const log: EpochLog[] = [];
  let bestVal = Infinity;
  let bestEpoch = 0;
  let stoppedEarly = false;

  try {
    for (let epoch = 1; epoch <= config.epochs; epoch++) {
      const ordered = seededShuffle(trainRecords, config.seed + epoch);
      let lossSum = 0;
      let tokenSum = 0;
      for (const group of batches(ordered, config.batchSize)) {
        const batch = encodeBatch(group, tokenizer, config);
        const tokens = tf.tidy(
          () => tf.notEqual(batch.targets, PAD).sum().dataSync()[0],
        );
        const cost = optimizer.minimize(
          () =>
            maskedLoss(
              model.apply([batch.encoder, batch.decoder], { training: true }) as tf.Tensor3D,
              batch.targets,
            ),
          true,
        ) as tf.Scalar;
        lossSum += cost.dataSync()[0] * tokens;
        tokenSum += tokens;
        tf.dispose([batch.encoder, batch.decoder, batch.targets, cost]);
      }
      const trainLoss = lossSum / tokenSum;
      const valGroups = [...batches(valRecords, config.batchSize)];
      const valLoss = hooks.evaluate
        ? hooks.evaluate(epoch)
        : meanLoss(model, valGroups, tokenizer, config);

      const entry: EpochLog = { epoch, train_loss: trainLoss, val_loss: valLoss };
      log.push(entry);
      fs.appendFileSync(logPath, JSON.stringify(entry) + "\n");
      hooks.onEpoch?.(entry);

      if (valLoss < bestVal) {
        bestVal = valLoss;
        bestEpoch = epoch;
      } else if (epoch - bestEpoch >= config.patience) {
        stoppedEarly = true;
        break;
      }
    }
  } catch (error) {
    if (error instanceof RangeError || /allocation|memory/i.test(String(error))) {
      throw new Error(
        `training ran out of memory; retry with a smaller preset (current: ${config.preset}), ` +
          `a smaller batchSize (current: ${config.batchSize}), or shorter maxInputLen`,
        { cause: error },
      );
    }
    throw error;
  } finally {
    optimizer.dispose();
  }

  await saveArtifacts(modelDir, model, tokenizer, config);
  return { modelDir, log, stoppedEarly, bestEpoch };
}
