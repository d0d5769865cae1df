/**
 * CLI entry point.
 *
 * Flags:
 *   --plant "<expr>"        expression the stub engine will "discover"
 *   --poll-interval <s>     hall-of-fame polling cadence (default 15)
 *   --emit-bad-operator     include a candidate outside the function set
 *   --emit-garbage          write one non-protocol line (degradation tests)
 */

import { adapt, AdapterOptions } from "./adapter";

function parseArgs(argv: string[]): AdapterOptions {
  const options: AdapterOptions = {};
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    switch (flag) {
      case "--plant":
        options.plant = argv[++i];
        break;
      case "--poll-interval":
        options.pollIntervalS = Number(argv[++i]);
        if (!(options.pollIntervalS! > 0)) {
          throw new Error("--poll-interval must be positive");
        }
        break;
      case "--emit-bad-operator":
        options.emitBadOperator = true;
        break;
      case "--emit-garbage":
        options.emitGarbage = true;
        break;
      default:
        throw new Error(`unknown flag ${flag}`);
    }
  }
  return options;
}

async function main(): Promise<void> {
  // the harness may close the pipe first; that is a normal shutdown
  process.stdout.on("error", (error: NodeJS.ErrnoException) => {
    if (error.code === "EPIPE") process.exit(0);
    throw error;
  });
  let options: AdapterOptions;
  try {
    options = parseArgs(process.argv.slice(2));
  } catch (error) {
    process.stderr.write(`${String(error)}\n`);
    process.exit(2);
  }
  const code = await adapt(process.stdin, process.stdout, options);
  process.exit(code);
}

main();
