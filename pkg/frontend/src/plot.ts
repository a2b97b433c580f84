import { readFileSync, writeFileSync } from "fs";
import { FIGURE_KINDS, FigureSpec, buildFigure } from "./figures.js";
import { SchemaMismatch } from "./schema.js";

/** Render one figure from a spec file: plot --spec <json>.  Exit 0 on
 * success, 2 on schema mismatch or invalid spec. */
export function main(argv: string[]): number {
  const i = argv.indexOf("--spec");
  if (i < 0 || i + 1 >= argv.length) {
    console.error("usage: plot --spec <spec.json>");
    return 2;
  }
  let spec: FigureSpec;
  try {
    spec = JSON.parse(readFileSync(argv[i + 1], "utf8"));
  } catch (err) {
    console.error(`cannot read spec: ${err}`);
    return 2;
  }
  if (!FIGURE_KINDS.includes(spec.kind) || !spec.input || !spec.output) {
    console.error(`spec needs kind in ${FIGURE_KINDS.join("|")}, input, output`);
    return 2;
  }
  try {
    const figure = buildFigure(spec);
    writeFileSync(spec.output, figure.svg);
  } catch (err) {
    if (err instanceof SchemaMismatch) {
      console.error(`schema mismatch: ${err.message}`);
      return 2;
    }
    throw err;
  }
  return 0;
}

if (process.argv[1] && process.argv[1].endsWith("plot.js")) {
  process.exit(main(process.argv.slice(2)));
}
