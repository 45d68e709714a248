/**
 * CLI: `train` and `generate` subcommands.
 *
 *   node dist/cli.js train --trainset t.jsonl --out model_dir \
 *       [--valset v.jsonl] [--preset small|medium|large] [--epochs N]
 *       [--batch-size N] [--learning-rate F] [--patience N] [--seed N]
 *   node dist/cli.js generate --testset t.jsonl --model model_dir \
 *       --out predictions.jsonl [--synthetic-context-ok]
 */

import { generate } from "./generate.js";
import { DEFAULT_CONFIG, ModelConfig, PRESETS, PresetName } from "./model.js";
import { train } from "./train.js";

function parseFlags(argv: string[]): Map<string, string | boolean> {
  const flags = new Map<string, string | boolean>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (!arg.startsWith("--")) {
      throw new Error(`unexpected argument ${arg}`);
    }
    const name = arg.slice(2);
    if (i + 1 < argv.length && !argv[i + 1].startsWith("--")) {
      flags.set(name, argv[++i]);
    } else {
      flags.set(name, true);
    }
  }
  return flags;
}

function required(flags: Map<string, string | boolean>, name: string): string {
  const value = flags.get(name);
  if (typeof value !== "string") {
    throw new Error(`missing required flag --${name}`);
  }
  return value;
}

function buildConfig(flags: Map<string, string | boolean>): ModelConfig {
  const config = { ...DEFAULT_CONFIG };
  const preset = flags.get("preset");
  if (typeof preset === "string") {
    if (!(preset in PRESETS)) {
      throw new Error(`unknown preset ${preset}; choose ${Object.keys(PRESETS).join("|")}`);
    }
    config.preset = preset as PresetName;
  }
  const numeric: Array<[string, keyof ModelConfig]> = [
    ["epochs", "epochs"],
    ["batch-size", "batchSize"],
    ["learning-rate", "learningRate"],
    ["patience", "patience"],
    ["seed", "seed"],
    ["max-input-len", "maxInputLen"],
    ["max-target-len", "maxTargetLen"],
    ["vocab-cap", "vocabCap"],
    ["holdout-fraction", "holdoutFraction"],
  ];
  for (const [flag, key] of numeric) {
    const value = flags.get(flag);
    if (typeof value === "string") {
      const parsed = Number(value);
      if (!Number.isFinite(parsed)) {
        throw new Error(`--${flag} expects a number, got ${value}`);
      }
      (config as Record<string, unknown>)[key] = parsed;
    }
  }
  return config;
}

export async function main(argv: string[]): Promise<number> {
  const [command, ...rest] = argv;
  try {
    if (command === "train") {
      const flags = parseFlags(rest);
      const config = buildConfig(flags);
      const valset = flags.get("valset");
      const result = await train(
        required(flags, "trainset"),
        typeof valset === "string" ? valset : null,
        required(flags, "out"),
        config,
      );
      for (const entry of result.log) {
        console.log(
          `epoch ${entry.epoch}: train_loss=${entry.train_loss.toFixed(4)} ` +
            `val_loss=${entry.val_loss.toFixed(4)}`,
        );
      }
      console.log(
        `saved model to ${result.modelDir}` +
          (result.stoppedEarly ? ` (early stop after epoch ${result.log.length})` : ""),
      );
      return 0;
    }
    if (command === "generate") {
      const flags = parseFlags(rest);
      // --use-real-context (the default) checks that test inputs came from
      // real contexts; --synthetic-context-ok silences that check.
      const useRealContext = flags.get("synthetic-context-ok")
        ? false
        : Boolean(flags.get("use-real-context") ?? true);
      const predictions = await generate(
        required(flags, "testset"),
        required(flags, "model"),
        required(flags, "out"),
        { useRealContext },
      );
      console.log(`wrote ${predictions.length} predictions to ${required(flags, "out")}`);
      return 0;
    }
    console.error("usage: cli.js <train|generate> [flags]");
    return 2;
  } catch (error) {
    console.error(`error: ${error instanceof Error ? error.message : error}`);
    return 1;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
