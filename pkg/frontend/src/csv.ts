import fs from "node:fs";
import Papa from "papaparse";

export interface Table {
    columns: string[];
    rows: Record<string, string>[];
}

/** Schema mismatch against one of the documented CSV layouts; carries the
 *  offending column name. */
export class SchemaError extends Error {
    readonly column: string;

    constructor(column: string, kind: string) {
        super(`schema mismatch for ${kind}: missing column "${column}"`);
        this.name = "SchemaError";
        this.column = column;
    }
}

export function readCsv(path: string): Table {
    const text = fs.readFileSync(path, "utf8");
    const parsed = Papa.parse<Record<string, string>>(text.trim(), {
        header: true,
        skipEmptyLines: true,
    });
    if (parsed.errors.length > 0) {
        const e = parsed.errors[0];
        throw new Error(`failed to parse ${path}: ${e.message} (row ${e.row})`);
    }
    return { columns: parsed.meta.fields ?? [], rows: parsed.data };
}

export function requireColumns(table: Table, needed: string[], kind: string): void {
    for (const column of needed) {
        if (!table.columns.includes(column)) {
            throw new SchemaError(column, kind);
        }
    }
}

/** Numeric view of one column; empty cells become NaN. */
export function numericColumn(table: Table, column: string): number[] {
    return table.rows.map((row) => {
        const cell = row[column];
        return cell === undefined || cell === "" ? NaN : Number(cell);
    });
}
