#!/usr/bin/env node
/**
 * plot <kind> <input.csv> -o <out.svg> [--title <t>] [--log-y]
 *      [--width <px>] [--height <px>]
 *
 * Kinds: energy | profiles | convergence | relative-entropy.
 * Reads the simulator's documented CSV outputs and writes a
 * deterministic SVG figure.
 */

import { SchemaError } from "./csv.js";
import { FIGURE_KINDS, FigureKind, FigureSpec, render } from "./figure.js";

const USAGE =
    "usage: plot <kind> <input.csv> -o <out.svg> " +
    "[--title <t>] [--log-y] [--width <px>] [--height <px>]\n" +
    `kinds: ${FIGURE_KINDS.join(", ")}`;

export function parseArgs(argv: string[]): FigureSpec {
    const positional: string[] = [];
    let output: string | undefined;
    let title: string | undefined;
    let logY = false;
    let width: number | undefined;
    let height: number | undefined;
    for (let i = 0; i < argv.length; i++) {
        const arg = argv[i];
        switch (arg) {
            case "-o":
            case "--output":
                output = argv[++i];
                break;
            case "--title":
                title = argv[++i];
                break;
            case "--log-y":
                logY = true;
                break;
            case "--width":
                width = Number(argv[++i]);
                break;
            case "--height":
                height = Number(argv[++i]);
                break;
            default:
                if (arg.startsWith("-")) {
                    throw new Error(`unknown option ${arg}\n${USAGE}`);
                }
                positional.push(arg);
        }
    }
    if (positional.length !== 2 || output === undefined) {
        throw new Error(USAGE);
    }
    const [kind, input] = positional;
    if (!FIGURE_KINDS.includes(kind as FigureKind)) {
        throw new Error(`unknown figure kind "${kind}"\n${USAGE}`);
    }
    return { kind: kind as FigureKind, input, output, title, logY, width, height };
}

export function main(argv: string[]): number {
    let spec: FigureSpec;
    try {
        spec = parseArgs(argv);
    } catch (err) {
        console.error((err as Error).message);
        return 2;
    }
    try {
        const written = render(spec);
        console.log(written);
        return 0;
    } catch (err) {
        if (err instanceof SchemaError) {
            console.error(err.message);
            return 1;
        }
        console.error((err as Error).message);
        return 1;
    }
}

const invokedDirectly =
    process.argv[1] !== undefined &&
    import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (invokedDirectly) {
    process.exit(main(process.argv.slice(2)));
}
