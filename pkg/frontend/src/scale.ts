export interface Scale {
    map(value: number): number;
    ticks: number[];
    label(value: number): number | string;
}

/** Round-number ticks covering [lo, hi]. */
export function linearTicks(lo: number, hi: number, target = 5): number[] {
    if (!(hi > lo)) {
        const pad = Math.abs(lo) > 0 ? Math.abs(lo) * 0.5 : 0.5;
        lo -= pad;
        hi += pad;
    }
    const rawStep = (hi - lo) / target;
    const mag = Math.pow(10, Math.floor(Math.log10(rawStep)));
    const candidates = [1, 2, 2.5, 5, 10].map((m) => m * mag);
    const step = candidates.find((s) => (hi - lo) / s <= target) ?? candidates[4];
    const first = Math.ceil(lo / step) * step;
    const ticks: number[] = [];
    for (let v = first; v <= hi + 1e-12 * step; v += step) {
        ticks.push(Math.abs(v) < 1e-12 * step ? 0 : v);
    }
    return ticks;
}

export function linearScale(lo: number, hi: number, r0: number, r1: number): Scale {
    if (!(hi > lo)) {
        const pad = Math.abs(lo) > 0 ? Math.abs(lo) * 0.5 : 0.5;
        lo -= pad;
        hi += pad;
    }
    const span = hi - lo;
    return {
        map: (v: number) => r0 + ((v - lo) / span) * (r1 - r0),
        ticks: linearTicks(lo, hi),
        label: (v: number) => formatTick(v),
    };
}

export function logScale(lo: number, hi: number, r0: number, r1: number): Scale {
    if (!(lo > 0) || !(hi > 0)) {
        throw new Error("log scale needs positive data");
    }
    let llo = Math.log10(lo);
    let lhi = Math.log10(hi);
    if (!(lhi > llo)) {
        llo -= 0.5;
        lhi += 0.5;
    }
    const span = lhi - llo;
    const ticks: number[] = [];
    for (let e = Math.ceil(llo - 1e-9); e <= Math.floor(lhi + 1e-9); e++) {
        ticks.push(e);
    }
    // cap the decade labels so dense ranges stay readable
    const stride = Math.max(1, Math.ceil(ticks.length / 8));
    const kept = ticks.filter((_, i) => i % stride === 0);
    return {
        map: (v: number) => r0 + ((Math.log10(v) - llo) / span) * (r1 - r0),
        ticks: kept.map((e) => Math.pow(10, e)),
        label: (v: number) => `1e${Math.round(Math.log10(v))}`,
    };
}

export function formatTick(v: number): string {
    if (v === 0) return "0";
    const a = Math.abs(v);
    if (a >= 1e4 || a < 1e-3) return v.toExponential(1).replace("e+", "e");
    const text = v.toPrecision(4);
    return text.includes(".") ? text.replace(/\.?0+$/, "") : text;
}
