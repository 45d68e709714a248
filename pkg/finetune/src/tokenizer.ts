/**
 * Word-level tokenizer shared by training and decoding.
 *
 * Lowercases, splits punctuation into standalone tokens, and maps words
 * through a frequency-built vocabulary with four reserved ids:
 * 0 <pad>, 1 <s>, 2 </s>, 3 <unk>.
 */

export const PAD = 0;
export const BOS = 1;
export const EOS = 2;
export const UNK = 3;

const RESERVED = ["<pad>", "<s>", "</s>", "<unk>"];

const TOKEN_RE = /[\p{L}\p{N}_]+|[^\s\p{L}\p{N}_]/gu;

export function wordTokens(text: string): string[] {
  return text.toLowerCase().normalize("NFC").match(TOKEN_RE) ?? [];
}

export interface TokenizerState {
  words: string[]; // index = id; includes the reserved prefix
}

export class Tokenizer {
  private readonly ids = new Map<string, number>();

  constructor(public readonly words: string[]) {
    words.forEach((word, id) => this.ids.set(word, id));
  }

  /** Build a vocabulary from texts, most frequent first, capped at `maxSize`. */
  static build(texts: Iterable<string>, maxSize = 5000): Tokenizer {
    const counts = new Map<string, number>();
    for (const text of texts) {
      for (const token of wordTokens(text)) {
        counts.set(token, (counts.get(token) ?? 0) + 1);
      }
    }
    const ranked = [...counts.entries()]
      .sort((a, b) => b[1] - a[1] || (a[0] < b[0] ? -1 : 1))
      .slice(0, Math.max(0, maxSize - RESERVED.length))
      .map(([word]) => word);
    return new Tokenizer([...RESERVED, ...ranked]);
  }

  get size(): number {
    return this.words.length;
  }

  encode(text: string): number[] {
    return wordTokens(text).map((token) => this.ids.get(token) ?? UNK);
  }

  /** Ids back to space-joined text; reserved tokens are dropped. */
  decode(ids: readonly number[]): string {
    return ids
      .filter((id) => id >= RESERVED.length && id < this.words.length)
      .map((id) => this.words[id])
      .join(" ");
  }

  toJSON(): TokenizerState {
    return { words: this.words };
  }

  static fromJSON(state: TokenizerState): Tokenizer {
    return new Tokenizer(state.words);
  }
}

/** Left-pad (encoder side) so the recurrent state ends on real tokens. */
export function padLeft(ids: readonly number[], length: number): number[] {
  const clipped = ids.slice(Math.max(0, ids.length - length));
  return [...new Array<number>(length - clipped.length).fill(PAD), ...clipped];
}

/** Right-pad (decoder side); clips to `length`. */
export function padRight(ids: readonly number[], length: number): number[] {
  const clipped = ids.slice(0, length);
  return [...clipped, ...new Array<number>(length - clipped.length).fill(PAD)];
}
