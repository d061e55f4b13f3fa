#!/usr/bin/env node
import path from "node:path";
import { parseArgs } from "node:util";
import { DataError, UsageError, loadManifest, loadResults } from "./csv";
import { FIGURE_KINDS, buildFigure } from "./figures";
import { renderSVG, writeImage } from "./render";

const USAGE = `usage: plots <kind> <run-dir> -o <file.svg|file.png> [options]

kinds:
${Object.entries(FIGURE_KINDS)
  .map(([k, v]) => `  ${k.padEnd(20)}${v.label}`)
  .join("\n")}

options:
  -o, --output <file>   output image path, .svg or .png (required)
  --width <px>          image width, default 760
  --height <px>         image height, default 480
  --title <text>        override the chart title (default: run name)
  -h, --help            show this message
`;

function parsePositiveInt(raw: string, flag: string): number {
  const v = Number(raw);
  if (!Number.isInteger(v) || v <= 0) {
    throw new UsageError(`${flag} wants a positive integer, got ${raw}`);
  }
  return v;
}

export async function main(argv: string[]): Promise<number> {
  let args;
  try {
    args = parseArgs({
      args: argv,
      allowPositionals: true,
      options: {
        output: { type: "string", short: "o" },
        width: { type: "string" },
        height: { type: "string" },
        title: { type: "string" },
        help: { type: "boolean", short: "h" },
      },
    });
  } catch (err) {
    process.stderr.write(`plots: ${(err as Error).message}\n${USAGE}`);
    return 2;
  }
  if (args.values.help) {
    process.stdout.write(USAGE);
    return 0;
  }
  try {
    const [kind, runDir, ...extra] = args.positionals;
    if (!kind || !runDir || extra.length > 0) {
      throw new UsageError("expected exactly <kind> <run-dir>");
    }
    if (!(kind in FIGURE_KINDS)) {
      throw new UsageError(
        `unknown kind ${kind}; known: ${Object.keys(FIGURE_KINDS).join(", ")}`,
      );
    }
    const out = args.values.output;
    if (!out) {
      throw new UsageError("missing -o/--output");
    }
    const ext = path.extname(out).toLowerCase();
    if (ext !== ".svg" && ext !== ".png") {
      throw new UsageError(`unsupported output extension ${ext || "(none)"}; use .svg or .png`);
    }
    const width = parsePositiveInt(args.values.width ?? "760", "--width");
    const height = parsePositiveInt(args.values.height ?? "480", "--height");

    // load and validate everything before the output file is touched
    const table = loadResults(runDir);
    const manifest = loadManifest(runDir);
    const option = buildFigure(kind, table, manifest, { title: args.values.title });
    const svg = renderSVG(option, width, height);
    await writeImage(out, svg);
    process.stdout.write(`wrote ${out}\n`);
    return 0;
  } catch (err) {
    if (err instanceof UsageError) {
      process.stderr.write(`plots: ${err.message}\n${USAGE}`);
      return 2;
    }
    if (err instanceof DataError) {
      process.stderr.write(`plots: ${err.message}\n`);
      return 1;
    }
    throw err;
  }
}

// the svg renderer keeps timers alive after dispose, so exit explicitly
main(process.argv.slice(2)).then(
  (code) => process.exit(code),
  (err) => {
    process.stderr.write(`plots: ${err?.stack ?? err}\n`);
    process.exit(1);
  },
);
