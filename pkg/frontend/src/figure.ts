import fs from "node:fs";
import path from "node:path";

import { SchemaError, Table, numericColumn, readCsv, requireColumns } from "./csv.js";
import { Scale, linearScale, logScale, formatTick } from "./scale.js";
import { logLogSlope } from "./slope.js";
import { PALETTE, document as svgDocument, marker, polyline, text } from "./svg.js";

export type FigureKind = "energy" | "profiles" | "convergence" | "relative-entropy";

export const FIGURE_KINDS: FigureKind[] = [
    "energy", "profiles", "convergence", "relative-entropy",
];

export interface FigureSpec {
    kind: FigureKind;
    input: string;
    output: string;
    title?: string;
    logY?: boolean;
    width?: number;
    height?: number;
}

interface Series {
    name: string;
    x: number[];
    y: number[];
    annotation?: string;
}

interface ChartConfig {
    series: Series[];
    xLabel: string;
    yLabel: string;
    xLog: boolean;
    yLog: boolean;
    title: string;
}

const MARGIN = { left: 70, right: 16, top: 30, bottom: 46 };

function finitePairs(s: Series, xLog: boolean, yLog: boolean): Array<[number, number]> {
    const out: Array<[number, number]> = [];
    for (let i = 0; i < s.x.length; i++) {
        const x = s.x[i];
        const y = s.y[i];
        if (!Number.isFinite(x) || !Number.isFinite(y)) continue;
        if (xLog && x <= 0) continue;
        if (yLog && y <= 0) continue;
        out.push([x, y]);
    }
    return out;
}

function drawChart(cfg: ChartConfig, width: number, height: number): string {
    const x0 = MARGIN.left;
    const x1 = width - MARGIN.right;
    const y0 = height - MARGIN.bottom;
    const y1 = MARGIN.top;

    const pts = cfg.series.map((s) => finitePairs(s, cfg.xLog, cfg.yLog));
    const allX = pts.flat().map(([x]) => x);
    const allY = pts.flat().map(([, y]) => y);
    if (allX.length === 0) {
        throw new Error("nothing to plot: no finite data points after filtering");
    }
    const sx: Scale = cfg.xLog
        ? logScale(Math.min(...allX), Math.max(...allX), x0, x1)
        : linearScale(Math.min(...allX), Math.max(...allX), x0, x1);
    const sy: Scale = cfg.yLog
        ? logScale(Math.min(...allY), Math.max(...allY), y0, y1)
        : linearScale(Math.min(...allY), Math.max(...allY), y0, y1);

    const parts: string[] = [];
    // grid and ticks
    for (const t of sx.ticks) {
        const px = sx.map(t);
        parts.push(polyline([[px, y0], [px, y1]], "#dddddd"));
        parts.push(text(px, y0 + 16, String(sx.label(t)), { anchor: "middle", size: 10 }));
    }
    for (const t of sy.ticks) {
        const py = sy.map(t);
        parts.push(polyline([[x0, py], [x1, py]], "#dddddd"));
        parts.push(text(x0 - 6, py + 3, String(sy.label(t)), { anchor: "end", size: 10 }));
    }
    // frame
    parts.push(polyline([[x0, y1], [x0, y0], [x1, y0]], "#222222"));
    // series
    cfg.series.forEach((s, i) => {
        const color = PALETTE[i % PALETTE.length];
        const mapped = pts[i].map(
            ([x, y]) => [sx.map(x), sy.map(y)] as [number, number],
        );
        if (mapped.length === 0) return;
        parts.push(polyline(mapped, color));
        if (mapped.length <= 24) {
            for (const [px, py] of mapped) parts.push(marker(px, py, color));
        }
    });
    // legend with optional per-series annotations
    let ly = y1 + 14;
    cfg.series.forEach((s, i) => {
        const color = PALETTE[i % PALETTE.length];
        const label = s.annotation ? `${s.name}  ${s.annotation}` : s.name;
        parts.push(polyline([[x1 - 150, ly - 4], [x1 - 134, ly - 4]], color));
        parts.push(text(x1 - 130, ly, label, { size: 10 }));
        ly += 14;
    });
    // labels
    parts.push(text((x0 + x1) / 2, height - 10, cfg.xLabel, { anchor: "middle" }));
    parts.push(text(14, (y0 + y1) / 2, cfg.yLabel, { anchor: "middle", rotate: true }));
    parts.push(text((x0 + x1) / 2, 16, cfg.title, { anchor: "middle", size: 13 }));
    return svgDocument(width, height, parts.join("\n"));
}

// -- per-kind chart assembly --------------------------------------------------

function energyChart(table: Table, spec: FigureSpec): ChartConfig {
    requireColumns(table, ["time", "H"], "energy");
    return {
        series: [{ name: "H", x: numericColumn(table, "time"), y: numericColumn(table, "H") }],
        xLabel: "time",
        yLabel: "free energy H",
        xLog: false,
        yLog: spec.logY ?? false,
        title: spec.title ?? "free energy decay",
    };
}

function profilesChart(table: Table, spec: FigureSpec): ChartConfig {
    requireColumns(table, ["x", "Phi"], "profiles");
    const x = numericColumn(table, "x");
    const series: Series[] = [];
    for (const column of table.columns) {
        if (/^u_\d+$/.test(column)) {
            series.push({ name: column, x, y: numericColumn(table, column) });
        }
    }
    if (series.length === 0) {
        throw new SchemaError("u_0", "profiles");
    }
    series.push({ name: "Phi", x, y: numericColumn(table, "Phi") });
    return {
        series,
        xLabel: "x",
        yLabel: "volume fraction / potential",
        xLog: false,
        yLog: false,
        title: spec.title ?? "solution profiles",
    };
}

export interface ConvergenceGroup {
    key: string;
    abscissa: number[]; // n_cells for spatial stages, tau for the time stage
    errors: number[];
    refit: number; // independently refitted order from the rows
    reported: number; // fitted_order column
}

/** Group convergence rows by (case, stage, field) and refit each slope
 *  from the data, independently of the reported column. */
export function convergenceGroups(table: Table): ConvergenceGroup[] {
    requireColumns(
        table,
        ["case", "stage", "n_cells", "tau", "field", "l2_error", "fitted_order"],
        "convergence",
    );
    const groups = new Map<string, { h: number[]; e: number[]; rep: number }>();
    for (const row of table.rows) {
        const key = `${row["case"]}/${row["stage"]}/${row["field"]}`;
        const isTime = row["stage"] === "time";
        const abscissa = Number(isTime ? row["tau"] : row["n_cells"]);
        const entry = groups.get(key) ?? { h: [], e: [], rep: NaN };
        entry.h.push(abscissa);
        entry.e.push(Number(row["l2_error"]));
        entry.rep = Number(row["fitted_order"]);
        groups.set(key, entry);
    }
    const out: ConvergenceGroup[] = [];
    for (const key of [...groups.keys()].sort()) {
        const { h, e, rep } = groups.get(key)!;
        const slope = logLogSlope(h, e);
        // error ~ h^p falls with n_cells (slope -p) and grows with tau (slope +p)
        const refit = key.includes("/time/") ? slope : -slope;
        out.push({ key, abscissa: h, errors: e, refit, reported: rep });
    }
    return out;
}

function convergenceChart(table: Table, spec: FigureSpec): ChartConfig {
    const groups = convergenceGroups(table);
    const series: Series[] = groups.map((g) => ({
        name: g.key,
        x: g.abscissa,
        y: g.errors,
        annotation: `order ${g.refit.toFixed(2)} (reported ${g.reported.toFixed(2)})`,
    }));
    const anyTime = groups.some((g) => g.key.includes("/time/"));
    const anySpace = groups.some((g) => !g.key.includes("/time/"));
    const xLabel = anyTime && anySpace ? "n_cells / tau" : anyTime ? "tau" : "n_cells";
    return {
        series,
        xLabel,
        yLabel: "L2 error",
        xLog: true,
        yLog: true,
        title: spec.title ?? "convergence",
    };
}

function relativeEntropyChart(table: Table, spec: FigureSpec): ChartConfig {
    requireColumns(table, ["delta", "time", "rel_entropy"], "relative-entropy");
    const groups = new Map<string, { x: number[]; y: number[] }>();
    for (const row of table.rows) {
        const key = row["delta"];
        const entry = groups.get(key) ?? { x: [], y: [] };
        entry.x.push(Number(row["time"]));
        entry.y.push(Number(row["rel_entropy"]));
        groups.set(key, entry);
    }
    const keys = [...groups.keys()].sort((a, b) => Number(b) - Number(a));
    const series: Series[] = keys.map((key) => ({
        name: `delta = ${key}`,
        x: groups.get(key)!.x,
        y: groups.get(key)!.y,
    }));
    return {
        series,
        xLabel: "time",
        yLabel: "relative entropy",
        xLog: false,
        yLog: true,
        title: spec.title ?? "relative entropy vs reference",
    };
}

// -- entry point ---------------------------------------------------------------

export function renderToString(spec: FigureSpec): string {
    const table = readCsv(spec.input);
    const width = spec.width ?? 640;
    const height = spec.height ?? 420;
    let cfg: ChartConfig;
    switch (spec.kind) {
        case "energy":
            cfg = energyChart(table, spec);
            break;
        case "profiles":
            cfg = profilesChart(table, spec);
            break;
        case "convergence":
            cfg = convergenceChart(table, spec);
            break;
        case "relative-entropy":
            cfg = relativeEntropyChart(table, spec);
            break;
        default:
            throw new Error(`unknown figure kind ${String(spec.kind)}`);
    }
    return drawChart(cfg, width, height);
}

/** Render the figure and write it to spec.output (SVG only; rendering is
 *  deterministic, so identical inputs give byte-identical files). */
export function render(spec: FigureSpec): string {
    if (path.extname(spec.output).toLowerCase() !== ".svg") {
        throw new Error(
            `output must be an .svg path (got ${spec.output}); ` +
            "this renderer emits deterministic SVG, not raster images",
        );
    }
    const svg = renderToString(spec);
    fs.mkdirSync(path.dirname(path.resolve(spec.output)), { recursive: true });
    fs.writeFileSync(spec.output, svg);
    return spec.output;
}
