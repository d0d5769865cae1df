/**
 * Deterministic stub search engine.
 *
 * It "searches" by warming up with a couple of trivial candidates and then
 * producing the planted target expression, so protocol tests get a
 * guaranteed discovery without any heavyweight search dependency.  Losses
 * are computed honestly on the training data the harness handed over.
 */

import { Dataset, pointAt } from "./csv";
import { Expression, evaluate, parse, print, variablesOf } from "./expr";
import { CandidateEntry } from "./protocol";

const LOSS_OFFSET = 1e-100;
// JSON cannot carry Infinity; an invalid candidate reports this sentinel.
const INVALID_LOSS = 1e300;

export interface StubOptions {
  plant?: string;
  emitBadOperator?: boolean;
}

export class StubEngine {
  private pool: Expression[] = [];
  private plant: Expression | null = null;
  private dataset: Dataset | null = null;
  private polls = 0;
  halted = false;

  constructor(private readonly options: StubOptions) {}

  /** Parse the plant and build the warm-up pool.  Throws on a bad plant. */
  configure(dataset: Dataset): void {
    this.dataset = dataset;
    const indices = [...dataset.columns.keys()].sort((a, b) => a - b);
    const first = indices[0] ?? 1;
    this.pool = [
      { kind: "var", index: first },
      { kind: "const", value: 1 },
    ];
    if (indices.length > 1) {
      this.pool.push({
        kind: "apply",
        op: "+",
        args: [
          { kind: "var", index: indices[0] },
          { kind: "var", index: indices[1] },
        ],
      });
    }
    if (this.options.plant !== undefined) {
      this.plant = parse(this.options.plant);
      const unknown = [...variablesOf(this.plant)].filter(
        (index) => !dataset.columns.has(index)
      );
      if (unknown.length > 0) {
        throw new Error(`plant uses columns missing from the dataset: v${unknown[0]}`);
      }
    }
  }

  private loss(candidate: Expression): number {
    const dataset = this.dataset!;
    let diffSq = 0;
    let targetSq = 0;
    for (let row = 0; row < dataset.targets.length; row++) {
      const predicted = evaluate(candidate, pointAt(dataset, row));
      if (Number.isNaN(predicted)) return INVALID_LOSS;
      const target = dataset.targets[row];
      diffSq += (target - predicted) ** 2;
      targetSq += target ** 2;
    }
    const loss = Math.sqrt(diffSq) / (Math.sqrt(targetSq) + LOSS_OFFSET);
    return Number.isFinite(loss) ? loss : INVALID_LOSS;
  }

  /**
   * Hall-of-fame snapshot for one poll.  The first poll reports only the
   * warm-up pool; later polls include the planted target, exercising the
   * multi-round conversation.
   */
  snapshot(): CandidateEntry[] {
    if (this.dataset === null) throw new Error("engine not configured");
    this.polls += 1;
    const members: Expression[] = [...this.pool];
    if (this.plant !== null && this.polls >= 2) {
      members.push(this.plant);
    }
    const entries: CandidateEntry[] = [];
    for (const member of members) {
      let serialized: string;
      try {
        serialized = print(member);
      } catch (error) {
        // non-serializable member: skip with a warning, never crash
        process.stderr.write(`stub: skipping candidate: ${String(error)}\n`);
        continue;
      }
      entries.push({ expr: serialized, train_loss: this.loss(member) });
    }
    if (this.options.emitBadOperator) {
      // an operator outside the function set; the harness must skip it
      entries.push({ expr: "absolutevalue(v1)", train_loss: 0.5 });
    }
    return entries;
  }

  halt(): void {
    this.halted = true;
  }
}
