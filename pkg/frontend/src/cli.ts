/**
 * Render one figure from a report file:
 *   node dist/cli.js --report report.json --kind variance-curve --out fig.svg
 */

import { writeFileSync } from "fs";

import { FIGURE_KINDS, FigureKind, render } from "./index";
import { loadReport } from "./report";

function parseArgs(argv: string[]): Record<string, string> {
  const out: Record<string, string> = {};
  for (let i = 0; i < argv.length; i++) {
    if (argv[i].startsWith("--")) {
      out[argv[i].slice(2)] = argv[i + 1] ?? "";
      i++;
    }
  }
  return out;
}

export function main(argv: string[]): number {
  const args = parseArgs(argv);
  if (!args.report || !args.kind || !args.out) {
    console.error("usage: --report <report.json> --kind <figure kind> --out <figure.svg>");
    console.error(`figure kinds: ${FIGURE_KINDS.join(", ")}`);
    return 2;
  }
  if (!FIGURE_KINDS.includes(args.kind as FigureKind)) {
    console.error(`unknown figure kind '${args.kind}'; expected one of ${FIGURE_KINDS.join(", ")}`);
    return 2;
  }
  try {
    const report = loadReport(args.report);
    const { svg } = render(report, args.kind as FigureKind);
    writeFileSync(args.out, svg);
    console.log(`wrote ${args.kind} to ${args.out}`);
    return 0;
  } catch (err) {
    console.error(String(err));
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
