/**
 * Wire protocol (adapter side): newline-delimited JSON over stdio.
 *
 * The harness speaks first with `hello`; the adapter answers with
 * `candidates` snapshots and reads back `decision` messages; either side
 * closes with `bye`.
 */

export interface Hello {
  type: "hello";
  problem_id: string;
  function_set: string[];
  max_complexity: number;
  budget_s: number;
  train_path: string;
  test_path: string;
}

export interface CandidateEntry {
  expr: string;
  train_loss: number;
}

export interface Candidates {
  type: "candidates";
  run_elapsed_s: number;
  exprs: CandidateEntry[];
}

export interface Decision {
  type: "decision";
  stop: boolean;
}

export interface Bye {
  type: "bye";
  reason: string;
}

export type Message = Hello | Candidates | Decision | Bye;

export class ProtocolError extends Error {}

export function encode(message: Message): string {
  return JSON.stringify(message);
}

export function decode(line: string): Message {
  let payload: unknown;
  try {
    payload = JSON.parse(line);
  } catch (error) {
    throw new ProtocolError(`not JSON: ${String(error)}`);
  }
  if (typeof payload !== "object" || payload === null || !("type" in payload)) {
    throw new ProtocolError("message must be an object with a 'type'");
  }
  const message = payload as Record<string, unknown>;
  switch (message.type) {
    case "hello": {
      requireFields(message, {
        problem_id: "string",
        function_set: "object",
        max_complexity: "number",
        budget_s: "number",
        train_path: "string",
        test_path: "string",
      });
      if (!Array.isArray(message.function_set)) {
        throw new ProtocolError("'function_set' must be a list");
      }
      return message as unknown as Hello;
    }
    case "candidates": {
      requireFields(message, { run_elapsed_s: "number", exprs: "object" });
      if (!Array.isArray(message.exprs)) {
        throw new ProtocolError("'exprs' must be a list");
      }
      for (const entry of message.exprs) {
        if (
          typeof entry !== "object" || entry === null ||
          typeof (entry as Record<string, unknown>).expr !== "string" ||
          typeof (entry as Record<string, unknown>).train_loss !== "number"
        ) {
          throw new ProtocolError("candidate entries need 'expr' and 'train_loss'");
        }
      }
      return message as unknown as Candidates;
    }
    case "decision": {
      requireFields(message, { stop: "boolean" });
      return message as unknown as Decision;
    }
    case "bye":
      return { type: "bye", reason: String(message.reason ?? "") };
    default:
      throw new ProtocolError(`unknown message type '${String(message.type)}'`);
  }
}

function requireFields(
  message: Record<string, unknown>, expected: Record<string, string>
): void {
  for (const [field, kind] of Object.entries(expected)) {
    if (typeof message[field] !== kind) {
      throw new ProtocolError(
        `bad ${String(message.type)} message: '${field}' must be ${kind}`
      );
    }
  }
}
