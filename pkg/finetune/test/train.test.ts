import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { afterAll, describe, expect, it } from "vitest";

import { loadTrainset } from "../src/data.js";
import { DEFAULT_CONFIG, ModelConfig, configHash, loadArtifacts } from "../src/model.js";
import { train } from "../src/train.js";

const FIXTURE = path.join(__dirname, "fixtures", "trainset_50.jsonl");

const tmpDir = fs.mkdtempSync(path.join(os.tmpdir(), "ft-train-"));
afterAll(() => fs.rmSync(tmpDir, { recursive: true, force: true }));

/** Tiny geometry so unit tests run in seconds. */
const TINY: ModelConfig = {
  ...DEFAULT_CONFIG,
  maxInputLen: 16,
  maxTargetLen: 8,
  seed: 42,
};

function tinyTrainset(count: number): string {
  const records = loadTrainset(FIXTURE).slice(0, count);
  const file = path.join(tmpDir, `tiny_${count}.jsonl`);
  fs.writeFileSync(
    file,
    records
      .map((r) =>
        JSON.stringify({
          input: r.input,
          target: r.target,
          meta: { pair_id: r.pairId, context_kind: r.contextKind },
        }),
      )
      .join("\n") + "\n",
  );
  return file;
}

describe("early stopping", () => {
  it("halts after the configured number of stagnant validation epochs", async () => {
    const epochs: number[] = [];
    const result = await train(
      tinyTrainset(10),
      null,
      path.join(tmpDir, "early_stop"),
      { ...TINY, epochs: 10, patience: 3 },
      {
        evaluate: (epoch) => {
          epochs.push(epoch);
          return 1.0; // never improves after the first epoch
        },
      },
    );
    expect(result.stoppedEarly).toBe(true);
    expect(result.bestEpoch).toBe(1);
    expect(result.log).toHaveLength(4); // 1 best + 3 stagnant
    expect(epochs).toEqual([1, 2, 3, 4]);
  });

  it("runs to the epoch budget when validation keeps improving", async () => {
    const result = await train(
      tinyTrainset(10),
      null,
      path.join(tmpDir, "no_stop"),
      { ...TINY, epochs: 3, patience: 3 },
      { evaluate: (epoch) => 10 - epoch },
    );
    expect(result.stoppedEarly).toBe(false);
    expect(result.log).toHaveLength(3);
  });
});

describe("artifacts", () => {
  it("reloading a saved dir reproduces the stored config hash", async () => {
    const dir = path.join(tmpDir, "resume");
    await train(tinyTrainset(10), null, dir, { ...TINY, epochs: 1 });
    const artifacts = await loadArtifacts(dir);
    expect(artifacts.configHash).toBe(configHash(artifacts.config, artifacts.tokenizer.size));
    expect(artifacts.config.preset).toBe("small");
  });

  it("writes a per-epoch training log", async () => {
    const dir = path.join(tmpDir, "logged");
    await train(tinyTrainset(10), null, dir, { ...TINY, epochs: 2 });
    const lines = fs
      .readFileSync(path.join(dir, "training_log.jsonl"), "utf8")
      .trim()
      .split("\n")
      .map((line) => JSON.parse(line));
    expect(lines).toHaveLength(2);
    expect(lines[0]).toMatchObject({ epoch: 1 });
    expect(typeof lines[0].train_loss).toBe("number");
    expect(typeof lines[0].val_loss).toBe("number");
  });

  it("uses an explicit validation set when given", async () => {
    const valFile = tinyTrainset(4);
    const result = await train(tinyTrainset(10), valFile, path.join(tmpDir, "valset"), {
      ...TINY,
      epochs: 1,
    });
    expect(result.log).toHaveLength(1);
    expect(Number.isFinite(result.log[0].val_loss)).toBe(true);
  });
});

describe("failure modes", () => {
  it("maps allocation failures to sizing guidance", async () => {
    await expect(
      train(tinyTrainset(10), null, path.join(tmpDir, "oom"), { ...TINY, epochs: 1 }, {
        evaluate: () => {
          throw new RangeError("Array buffer allocation failed");
        },
      }),
    ).rejects.toThrow(/smaller preset|batchSize/);
  });

  it("rejects schema-violating trainsets", async () => {
    const file = path.join(tmpDir, "bad.jsonl");
    fs.writeFileSync(file, '{"wrong": true}\n');
    await expect(
      train(file, null, path.join(tmpDir, "bad_model"), TINY),
    ).rejects.toThrow(/trainset schema/);
  });
});
