/** Minimal deterministic SVG assembly: fixed styling, fixed coordinate
 *  precision, no timestamps or generated ids. */

export const PALETTE = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#17becf", "#7f7f7f",
];

export function coord(v: number): string {
    return v.toFixed(2).replace(/^-0.00$/, "0.00");
}

export function escapeXml(text: string): string {
    return text
        .replace(/&/g, "&amp;")
        .replace(/</g, "&lt;")
        .replace(/>/g, "&gt;")
        .replace(/"/g, "&quot;");
}

export function tag(
    name: string,
    attrs: Record<string, string | number>,
    body = "",
): string {
    const parts = Object.entries(attrs)
        .map(([k, v]) => `${k}="${typeof v === "number" ? coord(v) : v}"`)
        .join(" ");
    return body === ""
        ? `<${name} ${parts}/>`
        : `<${name} ${parts}>${body}</${name}>`;
}

export function polyline(points: Array<[number, number]>, stroke: string,
                         dash = ""): string {
    const pts = points.map(([x, y]) => `${coord(x)},${coord(y)}`).join(" ");
    const attrs: Record<string, string> = {
        points: pts,
        fill: "none",
        stroke,
        "stroke-width": "1.5",
    };
    if (dash !== "") attrs["stroke-dasharray"] = dash;
    return tag("polyline", attrs);
}

export function marker(x: number, y: number, color: string): string {
    return tag("circle", { cx: x, cy: y, r: 2.5, fill: color });
}

export function text(
    x: number,
    y: number,
    content: string,
    opts: { anchor?: string; size?: number; rotate?: boolean } = {},
): string {
    const attrs: Record<string, string | number> = {
        x,
        y,
        "font-family": "Helvetica, Arial, sans-serif",
        "font-size": String(opts.size ?? 11),
        "text-anchor": opts.anchor ?? "start",
        fill: "#222222",
    };
    if (opts.rotate) {
        attrs["transform"] = `rotate(-90 ${coord(x)} ${coord(y)})`;
    }
    return tag("text", attrs, escapeXml(content));
}

export function document(width: number, height: number, body: string): string {
    const head =
        `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
        `height="${height}" viewBox="0 0 ${width} ${height}">`;
    const bg = tag("rect", {
        x: 0, y: 0, width, height, fill: "#ffffff",
    });
    return `${head}\n${bg}\n${body}\n</svg>\n`;
}
