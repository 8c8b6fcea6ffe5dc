import fs from "node:fs";
import os from "node:os";
import path from "node:path";
import { describe, expect, it } from "vitest";

import { SchemaError, numericColumn, readCsv, requireColumns } from "../src/csv.js";

const FIXTURES = path.join(__dirname, "fixtures");

describe("csv reading", () => {
    it("parses a timeseries fixture with full precision", () => {
        const table = readCsv(path.join(FIXTURES, "timeseries_decay.csv"));
        expect(table.columns).toContain("H");
        expect(table.columns).toContain("max_saturation_err");
        const H = numericColumn(table, "H");
        expect(H.length).toBe(table.rows.length);
        expect(H[0]).toBeGreaterThan(0);
    });

    it("turns empty cells into NaN", () => {
        const table = readCsv(path.join(FIXTURES, "timeseries_decay.csv"));
        const re = numericColumn(table, "rel_entropy");
        expect(Number.isNaN(re[0])).toBe(true);
    });

    it("names the missing column in schema errors", () => {
        const table = readCsv(path.join(FIXTURES, "timeseries_decay.csv"));
        try {
            requireColumns(table, ["time", "H", "enthalpy"], "energy");
            expect.unreachable("should have thrown");
        } catch (err) {
            expect(err).toBeInstanceOf(SchemaError);
            expect((err as SchemaError).column).toBe("enthalpy");
            expect((err as SchemaError).message).toContain('"enthalpy"');
        }
    });

    it("replays invariants from the file alone", () => {
        const table = readCsv(path.join(FIXTURES, "timeseries_decay.csv"));
        const sat = numericColumn(table, "max_saturation_err");
        for (const v of sat) expect(v).toBeLessThanOrEqual(1e-12);
        for (let i = 0; i < 3; i++) {
            const lo = numericColumn(table, `min_u_${i}`);
            const hi = numericColumn(table, `max_u_${i}`);
            for (let k = 0; k < lo.length; k++) {
                expect(lo[k]).toBeGreaterThan(0);
                expect(hi[k]).toBeLessThan(1);
                expect(lo[k]).toBeLessThanOrEqual(hi[k]);
            }
        }
    });
});

describe("malformed input", () => {
    it("rejects unparseable csv bodies", () => {
        const dir = fs.mkdtempSync(path.join(os.tmpdir(), "pnpf-plots-"));
        const bad = path.join(dir, "bad.csv");
        fs.writeFileSync(bad, 'a,b\n1,"unterminated\n');
        expect(() => readCsv(bad)).toThrow(/failed to parse/);
    });
});
