/**
 * The adapter loop: receive `hello`, configure the wrapped engine with the
 * datasets and constraints, then poll its hall of fame on a fixed interval,
 * sending `candidates` snapshots and halting the engine the moment the
 * harness decides `stop`.  The adapter never outlives a stop decision by
 * more than one polling interval: it halts and exits in the same turn.
 */

import * as readline from "readline";

import { readDatasetCsv } from "./csv";
import { Bye, Candidates, Message, ProtocolError, decode, encode } from "./protocol";
import { StubEngine, StubOptions } from "./stub";

export interface AdapterOptions extends StubOptions {
  pollIntervalS?: number;
  emitGarbage?: boolean;
}

interface Inbox {
  next(): Promise<Message | null>; // null = stream closed
}

function makeInbox(input: NodeJS.ReadableStream): Inbox {
  const queue: (Message | null)[] = [];
  const waiters: ((m: Message | null) => void)[] = [];
  let closed = false;

  const push = (item: Message | null) => {
    const waiter = waiters.shift();
    if (waiter) waiter(item);
    else queue.push(item);
  };

  const rl = readline.createInterface({ input, terminal: false });
  rl.on("line", (line) => {
    if (!line.trim()) return;
    try {
      push(decode(line));
    } catch (error) {
      if (error instanceof ProtocolError) {
        process.stderr.write(`adapter: dropping malformed line: ${error.message}\n`);
      } else {
        throw error;
      }
    }
  });
  rl.on("close", () => {
    closed = true;
    push(null);
  });

  return {
    next: () =>
      new Promise((resolve) => {
        if (queue.length > 0) resolve(queue.shift()!);
        else if (closed) resolve(null);
        else waiters.push(resolve);
      }),
  };
}

function sleep(seconds: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, seconds * 1000));
}

export async function adapt(
  input: NodeJS.ReadableStream,
  output: { write(chunk: string): unknown },
  options: AdapterOptions = {}
): Promise<number> {
  const inbox = makeInbox(input);
  const send = (message: Message) => {
    output.write(encode(message) + "\n");
  };
  const bye = (reason: string) => send({ type: "bye", reason } as Bye);

  const first = await inbox.next();
  if (first === null) return 0;
  if (first.type !== "hello") {
    bye(`expected hello, got ${first.type}`);
    return 1;
  }

  const engine = new StubEngine(options);
  try {
    engine.configure(readDatasetCsv(first.train_path));
  } catch (error) {
    // engine start failure: report and leave
    bye(`engine start failure: ${String(error)}`);
    return 1;
  }

  const pollInterval = options.pollIntervalS ?? 15;
  const started = Date.now();
  let sentGarbage = false;

  for (;;) {
    if (options.emitGarbage && !sentGarbage) {
      output.write("this line is not a protocol message\n");
      sentGarbage = true;
    }
    const snapshot: Candidates = {
      type: "candidates",
      run_elapsed_s: (Date.now() - started) / 1000,
      exprs: engine.snapshot(),
    };
    send(snapshot);

    const reply = await inbox.next();
    if (reply === null) return 0; // harness is gone
    if (reply.type === "bye") {
      engine.halt();
      return 0;
    }
    if (reply.type === "decision") {
      if (reply.stop) {
        engine.halt();
        bye("engine halted after stop decision");
        return 0;
      }
    } else {
      bye(`unexpected message type ${reply.type}`);
      return 1;
    }

    if ((Date.now() - started) / 1000 >= first.budget_s) {
      bye("engine budget exhausted");
      return 0;
    }
    await sleep(pollInterval);
  }
}
