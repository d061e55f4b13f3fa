import path from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";
import { DataError, loadManifest, loadResults, num, requireColumns } from "../src/csv";
import { FIGURE_KINDS, buildFigure } from "../src/figures";
import { renderSVG } from "../src/render";

const FIXTURES = fileURLToPath(new URL("./fixtures", import.meta.url));
const fx = (name: string) => path.join(FIXTURES, name);

describe("loadResults", () => {
  it("parses a run table with columns and rows", () => {
    const t = loadResults(fx("fsp-fixture"));
    expect(t.columns).toEqual(["buffer", "p_disagree", "se", "n"]);
    expect(t.rows).toHaveLength(3);
    expect(num(t.rows[0], "buffer")).toBe(0.5);
  });

  it("rejects a missing run dir", () => {
    expect(() => loadResults(fx("no-such-run"))).toThrow(DataError);
  });

  it("rejects an empty results file", () => {
    expect(() => loadResults(fx("broken-empty-results"))).toThrow(/empty/);
  });

  it("names the missing columns", () => {
    const t = loadResults(fx("broken-missing-column"));
    expect(() => requireColumns(t, FIGURE_KINDS["fsp"].requires)).toThrow(/p_disagree/);
  });
});

describe("figure options", () => {
  it("decay curve uses a log axis when entropies stay positive", () => {
    const opt = buildFigure(
      "decay-curve",
      loadResults(fx("decay-fixture")),
      loadManifest(fx("decay-fixture")),
      {},
    ) as Record<string, any>;
    expect(opt.yAxis.type).toBe("log");
    expect(opt.series.map((s: any) => s.name)).toEqual([
      "relative entropy",
      "decay envelope",
    ]);
  });

  it("buffer plot floors zero estimates at half a count", () => {
    const table = loadResults(fx("fsp-fixture"));
    const opt = buildFigure("fsp", table, loadManifest(fx("fsp-fixture")), {}) as Record<
      string,
      any
    >;
    const floor = 0.5 / Math.max(...table.rows.map((r) => num(r, "n")));
    const points: [number, number][] = opt.series[0].data;
    expect(points.every(([, p]) => p >= floor)).toBe(true);
    // one error-bar series per row behind the main line
    expect(opt.series).toHaveLength(1 + table.rows.length);
  });

  it("correlation plot draws each order with its truth", () => {
    const opt = buildFigure(
      "correlation",
      loadResults(fx("correlation-fixture")),
      loadManifest(fx("correlation-fixture")),
      {},
    ) as Record<string, any>;
    const names = opt.series.map((s: any) => s.name).filter(Boolean);
    expect(names).toContain("order 1");
    expect(names).toContain("order 1 truth");
    expect(names).toContain("order 2");
    expect(names).toContain("order 2 truth");
  });

  it("balance plot carries one bar per test function", () => {
    const table = loadResults(fx("gnz-fixture"));
    const opt = buildFigure("gnz", table, loadManifest(fx("gnz-fixture")), {}) as Record<
      string,
      any
    >;
    expect(opt.xAxis.data).toEqual(table.rows.map((r) => r["test_fn"]));
    expect(opt.series[0].data).toHaveLength(table.rows.length);
  });

  it("title override lands in the option", () => {
    const opt = buildFigure(
      "gnz",
      loadResults(fx("gnz-fixture")),
      loadManifest(fx("gnz-fixture")),
      { title: "custom heading" },
    ) as Record<string, any>;
    expect(opt.title.text).toBe("custom heading");
  });
});

describe("renderSVG", () => {
  it("is byte-identical across repeated renders in one process", () => {
    const table = loadResults(fx("decay-fixture"));
    const manifest = loadManifest(fx("decay-fixture"));
    const opt = buildFigure("decay-curve", table, manifest, {});
    const a = renderSVG(opt, 760, 480);
    const b = renderSVG(opt, 760, 480);
    expect(a).toBe(b);
    expect(a.startsWith("<svg")).toBe(true);
    expect(a).toContain("decay-fixture");
  });
});
