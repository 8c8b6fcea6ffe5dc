import fs from "node:fs";
import os from "node:os";
import path from "node:path";
import { beforeAll, describe, expect, it } from "vitest";

import { SchemaError, readCsv } from "../src/csv.js";
import { convergenceGroups, render, renderToString } from "../src/figure.js";

const FIXTURES = path.join(__dirname, "fixtures");

let tmp: string;
beforeAll(() => {
    tmp = fs.mkdtempSync(path.join(os.tmpdir(), "pnpf-figs-"));
});

describe("convergence slopes", () => {
    for (const fixture of ["convergence_elliptic.csv", "convergence_parabolic.csv"]) {
        it(`refits ${fixture} within 0.05 of the reported orders`, () => {
            const table = readCsv(path.join(FIXTURES, fixture));
            const groups = convergenceGroups(table);
            expect(groups.length).toBeGreaterThan(0);
            for (const g of groups) {
                expect(Math.abs(g.refit - g.reported)).toBeLessThanOrEqual(0.05);
            }
        });
    }

    it("annotates every series with the refit slope", () => {
        const svg = renderToString({
            kind: "convergence",
            input: path.join(FIXTURES, "convergence_elliptic.csv"),
            output: "unused.svg",
        });
        const matches = svg.match(/order \d+\.\d+ \(reported \d+\.\d+\)/g) ?? [];
        expect(matches.length).toBe(4); // poisson, helmholtz, composed x2
    });
});

describe("figure rendering", () => {
    it("renders a flat line for an equilibrium energy trace", () => {
        const out = path.join(tmp, "energy_eq.svg");
        render({
            kind: "energy",
            input: path.join(FIXTURES, "timeseries_equilibrium.csv"),
            output: out,
        });
        const svg = fs.readFileSync(out, "utf8");
        // the H polyline is drawn with markers; a flat series maps every
        // point to the same vertical pixel
        const ys = [...svg.matchAll(/<circle cx="[0-9.]+" cy="([0-9.]+)"/g)].map(
            (m) => Number(m[1]),
        );
        expect(ys.length).toBeGreaterThan(3);
        expect(Math.max(...ys) - Math.min(...ys)).toBeLessThanOrEqual(0.02);
    });

    it("renders profiles and relative-entropy figures", () => {
        const prof = render({
            kind: "profiles",
            input: path.join(FIXTURES, "snapshot.csv"),
            output: path.join(tmp, "profiles.svg"),
        });
        const svg = fs.readFileSync(prof, "utf8");
        for (const label of ["u_0", "u_1", "u_2", "Phi"]) {
            expect(svg).toContain(`>${label}</text>`);
        }
        render({
            kind: "relative-entropy",
            input: path.join(FIXTURES, "weak_strong.csv"),
            output: path.join(tmp, "re.svg"),
        });
        expect(fs.readFileSync(path.join(tmp, "re.svg"), "utf8")).toContain(
            "delta = 0.01",
        );
    });

    it("renders deterministically, byte for byte", () => {
        const a = path.join(tmp, "det_a.svg");
        const b = path.join(tmp, "det_b.svg");
        for (const kind of ["energy", "convergence"] as const) {
            const input = kind === "energy"
                ? path.join(FIXTURES, "timeseries_decay.csv")
                : path.join(FIXTURES, "convergence_parabolic.csv");
            render({ kind, input, output: a });
            render({ kind, input, output: b });
            expect(fs.readFileSync(a)).toEqual(fs.readFileSync(b));
        }
    });

    it("reports the offending column on schema mismatch", () => {
        const stripped = path.join(tmp, "no_H.csv");
        const text = fs.readFileSync(
            path.join(FIXTURES, "timeseries_decay.csv"), "utf8",
        );
        const lines = text.trim().split("\n");
        const cols = lines[0].split(",");
        const drop = cols.indexOf("H");
        const strippedLines = lines.map((line) =>
            line.split(",").filter((_, i) => i !== drop).join(","),
        );
        fs.writeFileSync(stripped, strippedLines.join("\n") + "\n");
        try {
            renderToString({ kind: "energy", input: stripped, output: "x.svg" });
            expect.unreachable("should have thrown");
        } catch (err) {
            expect(err).toBeInstanceOf(SchemaError);
            expect((err as SchemaError).column).toBe("H");
        }
    });

    it("rejects raster output paths with a clear message", () => {
        expect(() =>
            render({
                kind: "energy",
                input: path.join(FIXTURES, "timeseries_decay.csv"),
                output: path.join(tmp, "fig.png"),
            }),
        ).toThrow(/\.svg/);
    });
});
