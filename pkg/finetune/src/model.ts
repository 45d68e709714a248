/**
 * Small encoder-decoder question-generation model.
 *
 * The encoder GRU reads the rendered (context, answer) input left-padded so
 * its final state sits on real tokens; that state is broadcast across decoder
 * timesteps and concatenated with target-token embeddings before the decoder
 * GRU and the vocabulary projection. Everything is standard serializable
 * layers, so a saved artifact dir reloads exactly.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import * as tf from "@tensorflow/tfjs";

import { contentHash } from "./hash.js";
import { Tokenizer, TokenizerState } from "./tokenizer.js";

export type PresetName = "small" | "medium" | "large";

/** Width presets mirroring the model-size sweep. */
export const PRESETS: Record<PresetName, { embedDim: number; hiddenDim: number }> = {
  small: { embedDim: 16, hiddenDim: 32 },
  medium: { embedDim: 32, hiddenDim: 64 },
  large: { embedDim: 64, hiddenDim: 128 },
};

export interface ModelConfig {
  preset: PresetName;
  learningRate: number;
  epochs: number;
  batchSize: number;
  patience: number;
  maxInputLen: number;
  maxTargetLen: number;
  vocabCap: number;
  holdoutFraction: number;
  seed: number;
}

/** Training defaults: lr 3e-4, 10 epochs, batch 8, early-stop patience 3. */
export const DEFAULT_CONFIG: ModelConfig = {
  preset: "small",
  learningRate: 0.0003,
  epochs: 10,
  batchSize: 8,
  patience: 3,
  maxInputLen: 64,
  maxTargetLen: 24,
  vocabCap: 5000,
  holdoutFraction: 0.1,
  seed: 1234,
};

export function configHash(config: ModelConfig, vocabSize: number): string {
  return contentHash({ config, vocabSize });
}

export function buildModel(config: ModelConfig, vocabSize: number): tf.LayersModel {
  const { embedDim, hiddenDim } = PRESETS[config.preset];
  const seed = config.seed;

  const encoderInput = tf.input({ shape: [config.maxInputLen], dtype: "int32", name: "encoder_ids" });
  const decoderInput = tf.input({ shape: [config.maxTargetLen], dtype: "int32", name: "decoder_ids" });

  const embedding = tf.layers.embedding({
    inputDim: vocabSize,
    outputDim: embedDim,
    embeddingsInitializer: tf.initializers.randomUniform({ minval: -0.05, maxval: 0.05, seed }),
    name: "token_embedding",
  });

  const encoded = tf.layers
    .gru({
      units: hiddenDim,
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 1 }),
      recurrentInitializer: tf.initializers.glorotUniform({ seed: seed + 2 }),
      name: "encoder_gru",
    })
    .apply(embedding.apply(encoderInput)) as tf.SymbolicTensor;

  const broadcast = tf.layers
    .repeatVector({ n: config.maxTargetLen, name: "encoder_broadcast" })
    .apply(encoded) as tf.SymbolicTensor;

  const decoderStream = tf.layers
    .concatenate({ name: "decoder_stream" })
    .apply([embedding.apply(decoderInput) as tf.SymbolicTensor, broadcast]) as tf.SymbolicTensor;

  const decoded = tf.layers
    .gru({
      units: hiddenDim,
      returnSequences: true,
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 3 }),
      recurrentInitializer: tf.initializers.glorotUniform({ seed: seed + 4 }),
      name: "decoder_gru",
    })
    .apply(decoderStream) as tf.SymbolicTensor;

  const logits = tf.layers
    .dense({
      units: vocabSize,
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 5 }),
      name: "vocab_projection",
    })
    .apply(decoded) as tf.SymbolicTensor;

  return tf.model({ inputs: [encoderInput, decoderInput], outputs: logits });
}

// ── Artifact directory ──────────────────────────────────────────────────────

export interface Artifacts {
  model: tf.LayersModel;
  tokenizer: Tokenizer;
  config: ModelConfig;
  configHash: string;
}

export async function saveArtifacts(
  dir: string,
  model: tf.LayersModel,
  tokenizer: Tokenizer,
  config: ModelConfig,
): Promise<void> {
  fs.mkdirSync(dir, { recursive: true });
  await model.save(
    tf.io.withSaveHandler(async (artifacts) => {
      fs.writeFileSync(
        path.join(dir, "model.json"),
        JSON.stringify({ modelTopology: artifacts.modelTopology, weightSpecs: artifacts.weightSpecs }),
      );
      fs.writeFileSync(path.join(dir, "weights.bin"), Buffer.from(artifacts.weightData as ArrayBuffer));
      return { modelArtifactsInfo: { dateSaved: new Date(), modelTopologyType: "JSON" } };
    }),
  );
  fs.writeFileSync(path.join(dir, "tokenizer.json"), JSON.stringify(tokenizer.toJSON()));
  fs.writeFileSync(
    path.join(dir, "config.json"),
    JSON.stringify({ ...config, configHash: configHash(config, tokenizer.size) }, null, 2),
  );
}

export async function loadArtifacts(dir: string): Promise<Artifacts> {
  for (const required of ["model.json", "weights.bin", "tokenizer.json", "config.json"]) {
    if (!fs.existsSync(path.join(dir, required))) {
      throw new Error(`model dir ${dir} is missing ${required}`);
    }
  }
  const stored = JSON.parse(fs.readFileSync(path.join(dir, "model.json"), "utf8"));
  const weightData = new Uint8Array(fs.readFileSync(path.join(dir, "weights.bin"))).buffer;
  const model = await tf.loadLayersModel(
    tf.io.fromMemory({
      modelTopology: stored.modelTopology,
      weightSpecs: stored.weightSpecs,
      weightData,
    }),
  );
  const tokenizerState = JSON.parse(
    fs.readFileSync(path.join(dir, "tokenizer.json"), "utf8"),
  ) as TokenizerState;
  const tokenizer = Tokenizer.fromJSON(tokenizerState);
  const storedConfig = JSON.parse(fs.readFileSync(path.join(dir, "config.json"), "utf8"));
  const { configHash: storedHash, ...config } = storedConfig;
  return { model, tokenizer, config: config as ModelConfig, configHash: storedHash };
}
