import type { EChartsOption } from "echarts";
import { Manifest, ResultsTable, num, numOrNull, requireColumns } from "./csv";

export interface FigureOpts {
  title?: string;
}

export interface FigureKind {
  label: string;
  /** Columns the kind reads from results.csv. */
  requires: string[];
  build(table: ResultsTable, manifest: Manifest, opts: FigureOpts): EChartsOption;
}

const PALETTE = ["#2f6fb2", "#d1653a", "#4d9a5f", "#8a5fae", "#b23a48"];

function baseOption(title: string, subtitle: string): EChartsOption {
  return {
    animation: false,
    backgroundColor: "#ffffff",
    color: PALETTE,
    title: {
      text: title,
      subtext: subtitle,
      left: "center",
      textStyle: { fontSize: 15 },
      subtextStyle: { fontSize: 11 },
    },
    grid: { left: 70, right: 30, top: 64, bottom: 82 },
    legend: { bottom: 4, itemWidth: 18, itemHeight: 9, itemGap: 16 },
  };
}

function xAxis(name: string): object {
  return {
    type: "value",
    name,
    nameLocation: "middle",
    nameGap: 30,
    axisLine: { show: true },
    splitLine: { lineStyle: { color: "#e4e4e4" } },
  };
}

function yAxis(name: string, log = false): object {
  return {
    type: log ? "log" : "value",
    name,
    nameLocation: "middle",
    nameGap: 52,
    axisLine: { show: true },
    splitLine: { lineStyle: { color: "#e4e4e4" } },
    axisLabel: {
      // fixed-point labels for 4e-8 scale residuals run off the canvas
      formatter: (v: number) => {
        if (v === 0) return "0";
        const a = Math.abs(v);
        return a >= 1e-3 && a < 1e5 ? String(v) : v.toExponential(1);
      },
    },
  };
}

/**
 * A vertical segment with rectangular cap symbols at both ends.  One
 * series per bar keeps the option assembly trivial; row counts per
 * figure are small enough that this never matters.
 */
function errorBar(x: number | string, lo: number, hi: number, color: string): object {
  return {
    type: "line",
    data: [
      [x, lo],
      [x, hi],
    ],
    symbol: "rect",
    symbolSize: [7, 1.5],
    lineStyle: { width: 1.2, color },
    itemStyle: { color },
    silent: true,
    z: 3,
  };
}

function zeroLine(): object {
  return {
    silent: true,
    symbol: "none",
    label: { show: false },
    lineStyle: { color: "#999999", type: "dashed", width: 1 },
    data: [{ yAxis: 0 }],
  };
}

function buildDecayCurve(table: ResultsTable, manifest: Manifest, opts: FigureOpts): EChartsOption {
  const rows = [...table.rows].sort((a, b) => num(a, "t") - num(b, "t"));
  const entropy = rows.map((r) => [num(r, "t"), num(r, "entropy")] as [number, number]);
  const envelope = rows
    .map((r) => [num(r, "t"), numOrNull(r, "envelope")] as [number, number | null])
    .filter((p): p is [number, number] => p[1] !== null);
  // log scale only when every plotted value survives it
  const useLog =
    entropy.every(([, v]) => v > 0) && envelope.every(([, v]) => v > 0);
  const series: object[] = [
    {
      name: "relative entropy",
      type: "line",
      data: entropy,
      showSymbol: false,
      lineStyle: { width: 2 },
    },
  ];
  if (envelope.length > 0) {
    series.push({
      name: "decay envelope",
      type: "line",
      data: envelope,
      showSymbol: false,
      lineStyle: { width: 1.5, type: "dashed" },
    });
  }
  return {
    ...baseOption(opts.title ?? manifest.name, "relative entropy along the flow"),
    xAxis: xAxis("t"),
    yAxis: yAxis("relative entropy", useLog),
    series,
  } as EChartsOption;
}

function buildDebruijnResidual(
  table: ResultsTable,
  manifest: Manifest,
  opts: FigureOpts,
): EChartsOption {
  const rows = [...table.rows].sort((a, b) => num(a, "t") - num(b, "t"));
  const data = rows.map((r) => [num(r, "t"), num(r, "residual")]);
  return {
    ...baseOption(opts.title ?? manifest.name, "entropy-derivative residual along the flow"),
    xAxis: xAxis("t"),
    yAxis: yAxis("d/dt entropy + fisher"),
    series: [
      {
        name: "residual",
        type: "line",
        data,
        showSymbol: false,
        lineStyle: { width: 2 },
        markLine: zeroLine(),
      },
    ],
  } as EChartsOption;
}

function buildFsp(table: ResultsTable, manifest: Manifest, opts: FigureOpts): EChartsOption {
  const rows = [...table.rows].sort((a, b) => num(a, "buffer") - num(b, "buffer"));
  const maxN = Math.max(...rows.map((r) => num(r, "n")));
  // half a count out of n replicas; keeps zero estimates on the log axis
  const floor = 0.5 / maxN;
  const points: [number, number][] = [];
  const series: object[] = [];
  for (const r of rows) {
    const x = num(r, "buffer");
    const p = num(r, "p_disagree");
    const se = num(r, "se");
    points.push([x, Math.max(p, floor)]);
    series.push(
      errorBar(x, Math.max(p - 1.96 * se, floor), Math.max(p + 1.96 * se, floor), PALETTE[0]),
    );
  }
  series.unshift({
    name: "disagreement probability",
    type: "line",
    data: points,
    symbol: "circle",
    symbolSize: 7,
    lineStyle: { width: 2 },
  });
  return {
    ...baseOption(
      opts.title ?? manifest.name,
      `window disagreement vs. buffer width (floor ${floor} = half a count)`,
    ),
    xAxis: xAxis("buffer width"),
    yAxis: yAxis("P(disagree)", true),
    series,
  } as EChartsOption;
}

function buildCorrelation(table: ResultsTable, manifest: Manifest, opts: FigureOpts): EChartsOption {
  const orders = [...new Set(table.rows.map((r) => r["order"]))].sort();
  const series: object[] = [];
  orders.forEach((order, i) => {
    const color = PALETTE[i % PALETTE.length];
    const rows = table.rows
      .filter((r) => r["order"] === order)
      .sort((a, b) => num(a, "x") - num(b, "x"));
    series.push({
      name: `order ${order}`,
      type: "line",
      data: rows.map((r) => [num(r, "x"), num(r, "value")]),
      symbol: "circle",
      symbolSize: 7,
      itemStyle: { color },
      lineStyle: { width: 1.5, color, opacity: rows.length > 1 ? 1 : 0 },
    });
    for (const r of rows) {
      const se = num(r, "se");
      const v = num(r, "value");
      series.push(errorBar(num(r, "x"), v - 1.96 * se, v + 1.96 * se, color));
    }
    const truth = rows.map((r) => [num(r, "x"), num(r, "truth")]);
    series.push(
      rows.length > 1
        ? {
            name: `order ${order} truth`,
            type: "line",
            data: truth,
            showSymbol: false,
            lineStyle: { width: 1.5, type: "dashed", color },
          }
        : {
            name: `order ${order} truth`,
            type: "scatter",
            data: truth,
            symbol: "diamond",
            symbolSize: 11,
            itemStyle: { color: "#ffffff", borderColor: color, borderWidth: 1.5 },
          },
    );
  });
  return {
    ...baseOption(opts.title ?? manifest.name, "correlation estimates against closed forms"),
    xAxis: xAxis("x"),
    yAxis: yAxis("correlation"),
    series,
  } as EChartsOption;
}

function buildGnz(table: ResultsTable, manifest: Manifest, opts: FigureOpts): EChartsOption {
  const names = table.rows.map((r) => r["test_fn"]);
  const series: object[] = [
    {
      name: "balance residual",
      type: "bar",
      data: table.rows.map((r) => num(r, "residual")),
      barWidth: "55%",
      itemStyle: { color: PALETTE[0] },
      markLine: zeroLine(),
    },
  ];
  for (const r of table.rows) {
    const v = num(r, "residual");
    const se = num(r, "se");
    series.push(errorBar(r["test_fn"], v - 1.96 * se, v + 1.96 * se, "#333333"));
  }
  return {
    ...baseOption(opts.title ?? manifest.name, "equilibrium balance residual per test function"),
    xAxis: {
      type: "category",
      data: names,
      name: "test function",
      nameLocation: "middle",
      nameGap: 30,
    },
    yAxis: yAxis("residual"),
    series,
  } as EChartsOption;
}

export const FIGURE_KINDS: Record<string, FigureKind> = {
  "decay-curve": {
    label: "entropy decay with exponential envelope",
    requires: ["t", "entropy", "envelope"],
    build: buildDecayCurve,
  },
  "debruijn-residual": {
    label: "entropy-derivative residual over time",
    requires: ["t", "residual"],
    build: buildDebruijnResidual,
  },
  fsp: {
    label: "disagreement probability vs. buffer width",
    requires: ["buffer", "p_disagree", "se", "n"],
    build: buildFsp,
  },
  correlation: {
    label: "correlation estimates with error bars and closed forms",
    requires: ["order", "x", "value", "se", "truth"],
    build: buildCorrelation,
  },
  gnz: {
    label: "balance residuals per test function",
    requires: ["test_fn", "residual", "se", "n"],
    build: buildGnz,
  },
};

export function buildFigure(
  kind: string,
  table: ResultsTable,
  manifest: Manifest,
  opts: FigureOpts,
): EChartsOption {
  const fig = FIGURE_KINDS[kind];
  requireColumns(table, fig.requires);
  return fig.build(table, manifest, opts);
}
