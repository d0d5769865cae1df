import { describe, expect, it } from "vitest";

import { decode, encode, Message, ProtocolError } from "../src/protocol";

describe("protocol codec", () => {
  it("round-trips every message type", () => {
    const messages: Message[] = [
      {
        type: "hello",
        problem_id: "II.38.14",
        function_set: ["add", "mul"],
        max_complexity: 11,
        budget_s: 1800,
        train_path: "/tmp/train.csv",
        test_path: "/tmp/test.csv",
      },
      {
        type: "candidates",
        run_elapsed_s: 3.5,
        exprs: [{ expr: "(v1+v2)", train_loss: 0.25 }],
      },
      { type: "decision", stop: true },
      { type: "bye", reason: "done" },
    ];
    for (const message of messages) {
      expect(decode(encode(message))).toEqual(message);
    }
  });

  it("rejects malformed traffic", () => {
    expect(() => decode("garbage")).toThrow(ProtocolError);
    expect(() => decode('{"no_type": true}')).toThrow(ProtocolError);
    expect(() => decode('{"type": "warp"}')).toThrow(ProtocolError);
    expect(() => decode('{"type": "decision"}')).toThrow(ProtocolError);
    expect(() =>
      decode('{"type": "candidates", "run_elapsed_s": 1, "exprs": [{"expr": 5}]}')
    ).toThrow(ProtocolError);
  });
});
