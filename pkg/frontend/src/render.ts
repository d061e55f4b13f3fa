import fs from "node:fs";
import path from "node:path";
import * as echarts from "echarts";
import type { EChartsOption } from "echarts";
import { DataError, UsageError } from "./csv";

/**
 * Server-side render to an SVG string.  The renderer names style classes
 * with two process-wide counters (zr<instance>-cls-<class>), so a second
 * render in the same process differs in names only.  Renumbering both by
 * order of first appearance keeps output byte-identical regardless of how
 * many charts came before.
 */
function canonicalizeIds(svg: string): string {
  const seen = new Map<string, string>();
  return svg
    .replace(/\bzr\d+-/g, "zr0-")
    .replace(/zr0-cls-\d+/g, (tok) => {
      let mapped = seen.get(tok);
      if (mapped === undefined) {
        mapped = `zr0-cls-${seen.size}`;
        seen.set(tok, mapped);
      }
      return mapped;
    });
}

export function renderSVG(option: EChartsOption, width: number, height: number): string {
  const chart = echarts.init(null, null, {
    renderer: "svg",
    ssr: true,
    width,
    height,
  });
  try {
    chart.setOption(option);
    return canonicalizeIds(chart.renderToSVGString());
  } finally {
    chart.dispose();
  }
}

export async function writeImage(outPath: string, svg: string): Promise<void> {
  const ext = path.extname(outPath).toLowerCase();
  if (ext === ".svg") {
    fs.writeFileSync(outPath, svg);
    return;
  }
  if (ext === ".png") {
    let ResvgCtor: typeof import("@resvg/resvg-js").Resvg;
    try {
      ResvgCtor = (await import("@resvg/resvg-js")).Resvg;
    } catch {
      throw new DataError(
        "png output needs the @resvg/resvg-js rasterizer; install it or write .svg instead",
      );
    }
    const png = new ResvgCtor(svg).render().asPng();
    fs.writeFileSync(outPath, png);
    return;
  }
  throw new UsageError(`unsupported output extension ${ext || "(none)"}; use .svg or .png`);
}
