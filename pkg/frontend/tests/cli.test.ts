import fs from "node:fs";
import os from "node:os";
import path from "node:path";
import { describe, expect, it } from "vitest";

import { main, parseArgs } from "../src/cli.js";

const FIXTURES = path.join(__dirname, "fixtures");

describe("argument parsing", () => {
    it("parses the documented form", () => {
        const spec = parseArgs([
            "convergence", "table.csv", "-o", "fig.svg", "--title", "t", "--log-y",
        ]);
        expect(spec.kind).toBe("convergence");
        expect(spec.input).toBe("table.csv");
        expect(spec.output).toBe("fig.svg");
        expect(spec.logY).toBe(true);
    });

    it("rejects unknown kinds and missing output", () => {
        expect(() => parseArgs(["sparkline", "a.csv", "-o", "x.svg"])).toThrow(/kind/);
        expect(() => parseArgs(["energy", "a.csv"])).toThrow(/usage/);
    });
});

describe("cli entry", () => {
    it("renders and returns 0 on success", () => {
        const tmp = fs.mkdtempSync(path.join(os.tmpdir(), "pnpf-cli-"));
        const out = path.join(tmp, "energy.svg");
        const code = main([
            "energy", path.join(FIXTURES, "timeseries_decay.csv"), "-o", out,
        ]);
        expect(code).toBe(0);
        expect(fs.existsSync(out)).toBe(true);
        expect(fs.readFileSync(out, "utf8")).toContain("<svg");
    });

    it("returns 1 on schema mismatch and 2 on usage errors", () => {
        const tmp = fs.mkdtempSync(path.join(os.tmpdir(), "pnpf-cli-"));
        const code = main([
            "convergence",
            path.join(FIXTURES, "timeseries_decay.csv"),
            "-o",
            path.join(tmp, "x.svg"),
        ]);
        expect(code).toBe(1);
        expect(main(["energy"])).toBe(2);
    });
});
